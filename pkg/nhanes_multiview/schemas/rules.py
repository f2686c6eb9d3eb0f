"""Schema for harmonization rule files."""

from __future__ import annotations

from schema import And, Literal, Optional, Or, Regex, Schema, Use

from .manifest import CYCLE_RE

#: Cycle key standing for every cycle not listed explicitly.
ALL_CYCLES = "*"

value = Or(int, float, str, None)

source_schema = Or(And(str, len), And([And(str, len)], len))

recode_schema = Schema(
    {
        Optional(
            Literal("cycles", description="Cycles the map applies to (default: all)."),
            default=[],
        ): [Regex(CYCLE_RE)],
        Literal(
            "map",
            description="Value map old -> new; a list of pairs is checked for duplicate keys.",
        ): Or({Use(str): value}, [And([value], lambda pair: len(pair) == 2)]),
    },
)

eligibility_schema = Schema(
    {
        Literal("variable", description="Canonical variable the predicate reads."): str,
        Optional(Literal("min", description="Inclusive lower bound.")): Or(int, float),
        Optional(Literal("max", description="Inclusive upper bound.")): Or(int, float),
        Optional(Literal("values", description="Admissible values.")): [value],
    },
)

rule_schema = Schema(
    {
        Literal("target", description="Canonical variable name."): And(str, len),
        Literal("sources", description="Source variable(s) per cycle, '*' for the rest."): {
            Or(Regex(CYCLE_RE), ALL_CYCLES): source_schema,
        },
        Optional(Literal("component", description="Manifest component holding the source.")): str,
        Optional(Literal("label", description="Display label."), default=""): str,
        Optional(
            Literal("kind", description="Encoding class of the variable."),
            default="continuous",
        ): Or("continuous", "ordinal", "categorical"),
        Optional(
            Literal("combine", description="How several source variables merge."),
            default="first",
        ): Or("first", "mean"),
        Optional(Literal("recodes", description="Per-cycle value maps."), default=[]): [
            recode_schema
        ],
        Optional(
            Literal("drop_codes", description="Values meaning refused/don't know."),
            default=[],
        ): [value],
        Optional(Literal("eligibility", description="Row predicate, else missing.")): Or(
            eligibility_schema, None
        ),
        Optional(
            Literal("fill", description="Value for missing results, applied before eligibility.")
        ): value,
    },
)

view_schema = Schema(
    {
        Literal("components", description="Manifest components merged for this view."): [str],
        Literal("rules", description="Harmonization rules."): [rule_schema],
    },
)

rules_schema = Schema(
    {
        Literal("views", description="Harmonized views by name."): {str: view_schema},
    },
    description="Declarative rename/recode/eligibility rules per view.",
    name="rules",
)
