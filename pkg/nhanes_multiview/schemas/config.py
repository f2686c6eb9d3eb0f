"""Schemas for run and experiment configuration."""

from __future__ import annotations

from schema import And, Literal, Optional, Or, Regex, Schema, Use

from .manifest import CYCLE_RE

VARIANT_RE = r"^[A-Z][A-Z0-9_+\-\[\]]*(\(.*\))?$"

#: Hyperparameter grid used when the configuration gives none.
DEFAULT_GRID = {
    "kernels": ["linear", "rbf"],
    "C": [0.1, 1.0, 10.0, 100.0],
    "gamma": [0.001, 0.01, 0.1, 1.0],
}

#: Model variants of the diabetes experiment.
DEFAULT_VARIANTS = [
    "REG",
    "CCA_DL(15)",
    "CCA_DL_ALL(15)",
    "CCA_BL(6)",
    "CCA_BL_ALL(6)",
    "REG_PLUS_CCA(5, CCA_DL_ALL(15))",
    "REG_PLUS_CCA(10, CCA_DL_ALL(15))",
]

positive = And(Use(float), lambda val: val > 0)

grid_schema = Schema(
    {
        Optional(Literal("kernels", description="Kernels searched."), default=["linear", "rbf"]): [
            Or("linear", "rbf")
        ],
        Optional(
            Literal("C", description="Box constraints searched."), default=DEFAULT_GRID["C"]
        ): [positive],
        Optional(
            Literal("gamma", description="RBF widths searched."), default=DEFAULT_GRID["gamma"]
        ): [positive],
    },
)

experiment_schema = Schema(
    {
        Optional(Literal("scheme", description="Diabetes labelling scheme."), default="I"): Or(
            "I", "II"
        ),
        Optional(
            Literal("variants", description="Model variants, in report order."),
            default=DEFAULT_VARIANTS,
        ): [Regex(VARIANT_RE)],
        Optional(Literal("seed", description="Run seed."), default=0): int,
        Optional(Literal("grid", description="SVM hyperparameter grid."), default=DEFAULT_GRID): (
            grid_schema
        ),
        Optional(
            Literal("split_fraction", description="Training share of the stratified split."),
            default=0.7,
        ): And(Use(float), lambda val: 0 < val < 1),
        Optional(Literal("folds", description="Cross-validation folds."), default=5): And(
            int, lambda val: val >= 2  # noqa: PLR2004
        ),
        Optional(Literal("ridge", description="CCA covariance ridge."), default=1e-3): And(
            Use(float), lambda val: val >= 0
        ),
        Optional(Literal("tol", description="SMO KKT tolerance."), default=1e-3): positive,
        Optional(Literal("reg_features", description="Override of the REG feature list.")): [str],
        Optional(Literal("n_jobs", description="Parallel grid workers."), default=1): And(
            int, lambda val: val >= 1
        ),
    },
    description="Diabetes classification experiment.",
    name="experiment",
)

run_schema = Schema(
    {
        Optional(Literal("cache_dir", description="Download cache root."), default=None): Or(
            str, None
        ),
        Optional(Literal("rule_file", description="Harmonization rules."), default=None): Or(
            str, None
        ),
        Optional(Literal("manifest", description="Component manifest."), default=None): Or(
            str, None
        ),
        Optional(Literal("cycles", description="Release cycles to use."), default=None): Or(
            [Regex(CYCLE_RE)], None
        ),
        Optional(Literal("seed", description="Run seed."), default=0): int,
        Optional(Literal("output_dir", description="Output folder."), default="out"): str,
        Optional(Literal("views_dir", description="Harmonized view folder."), default=None): Or(
            str, None
        ),
        Optional(Literal("experiment", description="Experiment settings."), default={}): dict,
    },
    description="Top-level run configuration.",
    name="run",
)
