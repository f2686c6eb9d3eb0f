"""Schema for the NHANES component manifest."""

from __future__ import annotations

from schema import And, Literal, Optional, Or, Regex, Schema

CYCLE_RE = r"^\d{4}-\d{4}$"
STEM_RE = r"^[A-Z0-9_]{1,8}$"

component_schema = Schema(
    {
        Literal("name", description="Component identifier used by rule files."): And(str, len),
        Literal("category", description="NHANES data category."): Or(
            "demographics", "examination", "laboratory", "questionnaire"
        ),
        Literal("stems", description="File stem (without cycle suffix) per cycle."): {
            Regex(CYCLE_RE): Regex(STEM_RE),
        },
        Optional(Literal("description", description="Human-readable title.")): str,
    },
)

manifest_schema = Schema(
    {
        Literal("components", description="Component files to fetch."): [component_schema],
    },
    description="Expected NHANES component files per release cycle.",
    name="manifest",
)
