"""
Diabetes classification experiment over the harmonized views.

Respondents are labelled from the diagnosis question and fasting plasma glucose,
feature matrices are assembled per model variant (regular predictors, canonical
projections, or both stacked) and every variant is scored on a stratified
hold-out split after a cross-validated grid search.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from pathlib import Path
import re
from typing import Any, Literal, NamedTuple

import numpy as np
import pandas as pd

from nhanes_multiview.cca import CcaModel, cca_fit, cca_transform_x
from nhanes_multiview.evaluation import (
    ClassificationReport,
    feature_weights,
    roc_curve,
    write_reports,
)
from nhanes_multiview.exceptions import (
    BadK,
    ConfigError,
    MissingView,
    NhanesMultiviewError,
    UnfittedCca,
    UnknownColumn,
)
from nhanes_multiview.harmonize import (
    Kind,
    complete_cases,
    join_views,
    read_view,
    to_design_matrix,
    write_view,
)
from nhanes_multiview.model import (
    GridCell,
    KernelSpec,
    decision_scores,
    expand_grid,
    grid_search,
    svm_train,
    train_test_split,
)
from nhanes_multiview.table import ColumnTable

logger = logging.getLogger(__name__)

Scheme = Literal["I", "II"]

DEMOGRAPHICS = "demographics"
BODY_MEASURES = "body_measures"
LABORATORY = "laboratory"
SMOKING = "smoking"
OUTCOMES = "outcomes"

#: Diagnosis question, 1 for yes and 0 for no.
DIAGNOSED = "DIAGNOSED"
#: Fasting plasma glucose, mg/dl.
FPG = "FPG"

#: Fasting glucose at or above which diabetes is undiagnosed.
DIABETES_FPG = 126.0
#: Fasting glucose at or above which a respondent is pre-diabetic.
PREDIABETES_FPG = 100.0

#: Regular diabetes predictors, in report order.
REG_FEATURES = (
    "FAMILY_HISTORY",
    "AGE",
    "GENDER",
    "RACE",
    "HOUSEHOLD_INCOME",
    "EDUCATION",
    "HEIGHT",
    "WEIGHT",
    "BMI",
    "WAIST",
    "HYPERTENSION",
    "DRINKS_PER_DAY",
    "SMOKER",
    "CIGS_PER_DAY",
)

#: View pairs for canonical correlation variants, projected view first.
CCA_PAIRS = {
    "DL": (DEMOGRAPHICS, LABORATORY),
    "BL": (BODY_MEASURES, LABORATORY),
}


class DiabetesLabel(str, Enum):
    """Class of one respondent under a labelling scheme."""

    CASE = "Case"
    NON_CASE = "NonCase"
    EXCLUDED = "Excluded"


def _missing(value: Any) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def assign_diabetes_label(
    diagnosed: bool | float | None, fpg: float | None, scheme: Scheme = "I"
) -> DiabetesLabel:
    """
    Label a respondent from diagnosis status and fasting glucose.

    Scheme I counts diagnosed and undiagnosed diabetes as cases and everyone
    else as non-cases. Scheme II excludes diagnosed respondents and counts
    undiagnosed diabetes and pre-diabetes (``[100, 126)`` mg/dl) as cases.
    A missing diagnosis answer, or a missing glucose reading when the answer
    is no, yields ``Excluded``.

    Parameters
    ----------
    diagnosed : bool, float or None
        Answer to the diagnosis question (truthy for yes), missing as ``None``/``NaN``.
    fpg : float or None
        Fasting plasma glucose in mg/dl, missing as ``None``/``NaN``.
    scheme : Scheme
        ``"I"`` or ``"II"``.

    Returns
    -------
    DiabetesLabel
        Respondent class.

    Raises
    ------
    ConfigError
        Unknown scheme.

    Examples
    --------
    >>> assign_diabetes_label(True, None, "I")
    <DiabetesLabel.CASE: 'Case'>
    >>> assign_diabetes_label(False, 130.0, "II").value
    'Case'
    >>> assign_diabetes_label(False, 90.0, "I").value
    'NonCase'
    """
    if scheme not in ("I", "II"):
        raise ConfigError(f"Unknown scheme {scheme!r}. Valid schemes are: I, II")

    match scheme, (None if _missing(diagnosed) else bool(diagnosed)):
        case "I", True:
            return DiabetesLabel.CASE
        case "II", True:
            return DiabetesLabel.EXCLUDED
        case _, None:
            return DiabetesLabel.EXCLUDED
        case _ if _missing(fpg):
            return DiabetesLabel.EXCLUDED
        case "I", False:
            return DiabetesLabel.CASE if fpg >= DIABETES_FPG else DiabetesLabel.NON_CASE
        case _:
            return DiabetesLabel.CASE if fpg >= PREDIABETES_FPG else DiabetesLabel.NON_CASE


def label_respondents(outcomes: ColumnTable, scheme: Scheme = "I") -> pd.Series:
    """
    Label every row of the outcomes view.

    Parameters
    ----------
    outcomes : ColumnTable
        View holding :data:`DIAGNOSED` and :data:`FPG`.
    scheme : Scheme
        Labelling scheme.

    Returns
    -------
    pandas.Series
        :class:`DiabetesLabel` per row, indexed by respondent key.
    """
    outcomes.require([DIAGNOSED, FPG])
    labels = [
        assign_diabetes_label(diag, fpg, scheme)
        for diag, fpg in zip(outcomes.column(DIAGNOSED), outcomes.column(FPG), strict=True)
    ]
    return pd.Series(labels, index=outcomes.keys, dtype=object)


def _signs(labels: pd.Series) -> pd.Series:
    kept = labels[labels != DiabetesLabel.EXCLUDED]
    return kept.map(lambda label: 1 if label == DiabetesLabel.CASE else -1).astype(int)


_CONFIG_RE = re.compile(r"^(?P<kind>[A-Z_]+?)(?:\((?P<args>.*)\))?$")
_DISPLAY_CCA_RE = re.compile(r"^CCA-(?P<pair>DL|BL)(?:-(?P<n>\d+))?(?P<all>-ALL)?$")
_DISPLAY_STACK_RE = re.compile(r"^REG\+\[(?P<base>.+)\]-(?P<m>\d+)$")

VariantKind = Literal["REG", "CCA_DL", "CCA_DL_ALL", "CCA_BL", "CCA_BL_ALL", "REG_PLUS_CCA"]
_KINDS = ("REG", "CCA_DL", "CCA_DL_ALL", "CCA_BL", "CCA_BL_ALL", "REG_PLUS_CCA")


@dataclass(frozen=True)
class ModelVariant:
    """
    One model of the experiment.

    Parameters
    ----------
    kind : VariantKind
        Feature construction.
    n : int, optional
        Canonical components used by CCA variants (default: all fitted).
    m : int, optional
        Canonical features stacked onto the regular predictors.
    base : ModelVariant, optional
        CCA variant whose features are stacked.

    Raises
    ------
    ConfigError
        Parameters missing or out of range for `kind`.
    """

    kind: VariantKind
    n: int | None = None
    m: int | None = None
    base: ModelVariant | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"Unknown variant {self.kind!r}. Valid variants are: {_KINDS}")
        if self.n is not None and self.n < 1:
            raise ConfigError(f"{self.kind} needs n >= 1, got {self.n}")
        if self.kind in ("CCA_DL", "CCA_DL_ALL") and self.n is None:
            raise ConfigError(f"{self.kind} needs a component count, e.g. {self.kind}(15)")
        if self.kind == "REG_PLUS_CCA":
            if self.m is None or self.m < 1:
                raise ConfigError(f"REG_PLUS_CCA needs m >= 1, got {self.m}")
            if self.base is None or self.base.pair is None:
                raise ConfigError("REG_PLUS_CCA needs a CCA base variant")

    @property
    def pair(self) -> str | None:
        """
        Canonical view pair used, ``"DL"`` or ``"BL"``.

        Returns
        -------
        str or None
            Pair key of :data:`CCA_PAIRS`; ``None`` for REG.
        """
        if self.kind.startswith("CCA_"):
            return self.kind.split("_")[1]
        return None

    @property
    def all_rows(self) -> bool:
        """
        Whether every row of the projected view is used, not only paired ones.

        Returns
        -------
        bool
            ``True`` for ``*_ALL`` variants.
        """
        return self.kind.endswith("_ALL")

    @classmethod
    def parse(cls, text: str | ModelVariant) -> ModelVariant:
        """
        Parse config syntax (``CCA_DL_ALL(15)``) or display syntax (``CCA-DL-15-ALL``).

        Parameters
        ----------
        text : str or ModelVariant
            Variant description.

        Returns
        -------
        ModelVariant
            Parsed variant.

        Raises
        ------
        ConfigError
            Unparseable text.

        Examples
        --------
        >>> ModelVariant.parse("REG_PLUS_CCA(5, CCA_DL_ALL(15))").label
        'REG+[CCA-DL-15-ALL]-5'
        >>> str(ModelVariant.parse("CCA-BL-6"))
        'CCA_BL(6)'
        """
        if isinstance(text, ModelVariant):
            return text
        text = text.strip()

        if text == "REG":
            return cls("REG")
        if match := _DISPLAY_CCA_RE.match(text):
            kind = f"CCA_{match['pair']}" + ("_ALL" if match["all"] else "")
            return cls(kind, n=int(match["n"]) if match["n"] else None)
        if match := _DISPLAY_STACK_RE.match(text):
            return cls("REG_PLUS_CCA", m=int(match["m"]), base=cls.parse(match["base"]))

        match = _CONFIG_RE.match(text)
        if not match or match["kind"] not in _KINDS:
            raise ConfigError(f"Cannot parse model variant {text!r}")
        kind, args = match["kind"], match["args"]
        try:
            if kind == "REG_PLUS_CCA":
                m, _, base = (args or "").partition(",")
                return cls(kind, m=int(m), base=cls.parse(base))
            return cls(kind, n=int(args) if args else None)
        except ValueError as err:
            raise ConfigError(f"Cannot parse model variant {text!r}: {err}") from err

    @property
    def label(self) -> str:
        """
        Display name used in reports.

        Returns
        -------
        str
            E.g. ``CCA-DL-15-ALL`` or ``REG+[CCA-DL-15-ALL]-5``.
        """
        if self.kind == "REG":
            return "REG"
        if self.kind == "REG_PLUS_CCA":
            return f"REG+[{self.base.label}]-{self.m}"
        text = f"CCA-{self.pair}"
        if self.n is not None:
            text += f"-{self.n}"
        return text + ("-ALL" if self.all_rows else "")

    @property
    def slug(self) -> str:
        """
        File-name friendly form of :attr:`label`.

        Returns
        -------
        str
            Lowercase alphanumerics and underscores.
        """
        return re.sub(r"[^a-z0-9]+", "_", self.label.lower()).strip("_")

    def __str__(self) -> str:
        if self.kind == "REG_PLUS_CCA":
            return f"REG_PLUS_CCA({self.m}, {self.base})"
        return self.kind if self.n is None else f"{self.kind}({self.n})"


@dataclass(frozen=True)
class StudyData:
    """
    Harmonized views of one study.

    Parameters
    ----------
    views : dict[str, ColumnTable]
        Table per view name.
    kinds : dict[str, dict[str, Kind]]
        Encoding class per variable, per view.
    """

    views: dict[str, ColumnTable]
    kinds: dict[str, dict[str, Kind]] = field(default_factory=dict)

    def view(self, name: str) -> ColumnTable:
        """
        Get a view.

        Parameters
        ----------
        name : str
            View name.

        Returns
        -------
        ColumnTable
            View table.

        Raises
        ------
        MissingView
            View absent.
        """
        if name not in self.views:
            raise MissingView(f"View {name!r} not available; have {sorted(self.views)}")
        return self.views[name]

    def variables(self, name: str) -> list[str]:
        """
        Variables of a view, key excluded.

        Parameters
        ----------
        name : str
            View name.

        Returns
        -------
        list[str]
            Variable names in storage order.
        """
        table = self.view(name)
        return [col for col in table.columns if col != table.key]

    def view_kinds(self, name: str) -> dict[str, Kind]:
        """
        Encoding classes of a view.

        Parameters
        ----------
        name : str
            View name.

        Returns
        -------
        dict[str, Kind]
            Kind per variable (continuous unless recorded).
        """
        return self.kinds.get(name, {})

    @classmethod
    def from_dir(cls, views_dir: Path | str) -> StudyData:
        """
        Read every view written by :meth:`write`.

        Parameters
        ----------
        views_dir : Path | str
            Folder of ``<view>.csv`` files with JSON sidecars.

        Returns
        -------
        StudyData
            Views found.
        """
        views, kinds = {}, {}
        for path in sorted(Path(views_dir).glob("*.csv")):
            if path.with_suffix(".json").exists():
                views[path.stem], kinds[path.stem] = read_view(path)
        if not views:
            raise MissingView(f"No views found in {views_dir}")
        return cls(views, kinds)

    def write(self, views_dir: Path | str) -> list[Path]:
        """
        Persist every view.

        Parameters
        ----------
        views_dir : Path | str
            Output folder.

        Returns
        -------
        list[Path]
            CSV paths written.
        """
        return [
            write_view(table, Path(views_dir) / f"{name}.csv", self.view_kinds(name))
            for name, table in self.views.items()
        ]


class FeatureSet(NamedTuple):
    """Design matrix of one variant with aligned labels."""

    #: ``n x p`` features.
    X: np.ndarray
    #: ``+1``/``-1`` labels.
    y: np.ndarray
    #: Feature names.
    names: list[str]
    #: Respondent keys of the rows.
    keys: np.ndarray


def _restrict(features: np.ndarray, keys: np.ndarray, signs: pd.Series) -> tuple:
    keep = np.isin(keys, signs.index.to_numpy())
    return features[keep], signs.loc[keys[keep]].to_numpy(), keys[keep]


def _reg_features(
    study: StudyData, features: Sequence[str], signs: pd.Series
) -> FeatureSet:
    search = (OUTCOMES, DEMOGRAPHICS, BODY_MEASURES, SMOKING, LABORATORY)
    owners: dict[str, str] = {}
    for name in features:
        owner = next(
            (view for view in search if view in study.views and name in study.variables(view)),
            None,
        )
        if owner is None:
            raise UnknownColumn(f"Feature {name!r} is in none of the views {sorted(study.views)}")
        owners[name] = owner

    table = study.view(OUTCOMES)
    kinds: dict[str, Kind] = dict(study.view_kinds(OUTCOMES))
    for view in dict.fromkeys(owners.values()):
        if view != OUTCOMES:
            table = join_views(table, study.view(view))
            kinds |= study.view_kinds(view)

    table = complete_cases(table, list(features)).table
    design = to_design_matrix(table, list(features), kinds, categorical="codes")
    X, y, keys = _restrict(design.values, design.keys, signs)
    return FeatureSet(X, y, design.names, keys)


def fit_view_cca(study: StudyData, pair: str, k: int | None, ridge: float) -> CcaModel:
    """
    Fit canonical correlations on the complete, row-paired rows of a view pair.

    Parameters
    ----------
    study : StudyData
        Views.
    pair : str
        Key of :data:`CCA_PAIRS`.
    k : int, optional
        Components (default: as many as the smaller view allows).
    ridge : float
        Covariance ridge.

    Returns
    -------
    CcaModel
        Model carrying both views' names and encodings.

    Raises
    ------
    MissingView
        A view of the pair is absent.
    """
    x_view, y_view = CCA_PAIRS[pair]
    x_cols, y_cols = study.variables(x_view), study.variables(y_view)
    paired = join_views(study.view(x_view), study.view(y_view))
    paired = complete_cases(paired, x_cols + y_cols).table

    design_x = to_design_matrix(paired, x_cols, study.view_kinds(x_view))
    design_y = to_design_matrix(paired, y_cols, study.view_kinds(y_view))
    k = k or min(design_x.values.shape[1], design_y.values.shape[1])
    logger.info("Fitting CCA-%s on %d paired rows with k=%d", pair, len(paired), k)
    return cca_fit(
        design_x.values,
        design_y.values,
        k,
        ridge,
        names_x=design_x.names,
        names_y=design_y.names,
        encoding_x=design_x.encoding,
        encoding_y=design_y.encoding,
    )


def _cca_features(
    study: StudyData, variant: ModelVariant, model: CcaModel, signs: pd.Series
) -> FeatureSet:
    n = variant.n or model.k
    if n > model.k:
        raise BadK(f"{variant.label} needs {n} components, model has {model.k}")

    x_view, y_view = CCA_PAIRS[variant.pair]
    x_cols = study.variables(x_view)
    table = study.view(x_view)
    required = list(x_cols)
    if not variant.all_rows:
        table = join_views(table, study.view(y_view))
        required += study.variables(y_view)
    table = complete_cases(table, required).table

    design = to_design_matrix(table, x_cols, study.view_kinds(x_view), model.encoding_x)
    projected = cca_transform_x(model, design.values)[:, :n]
    X, y, keys = _restrict(projected, design.keys, signs)
    names = [f"CCA_{variant.pair}_{i + 1}" for i in range(n)]
    return FeatureSet(X, y, names, keys)


def _candidate_features(
    study: StudyData,
    variant: ModelVariant,
    cca_models: Mapping[str, CcaModel],
    signs: pd.Series,
    reg_features: Sequence[str],
) -> FeatureSet:
    base = variant.base if variant.kind == "REG_PLUS_CCA" else variant
    if base.pair not in cca_models:
        raise UnfittedCca(f"{variant.label} needs a fitted CCA-{base.pair} model")
    cca = _cca_features(study, base, cca_models[base.pair], signs)
    if variant.kind != "REG_PLUS_CCA":
        return cca

    if variant.m > len(cca.names):
        raise BadK(f"{variant.label} stacks {variant.m} of {len(cca.names)} CCA features")
    reg = _reg_features(study, reg_features, signs)
    _, reg_rows, cca_rows = np.intersect1d(reg.keys, cca.keys, return_indices=True)
    order = np.argsort(reg_rows, kind="stable")
    reg_rows, cca_rows = reg_rows[order], cca_rows[order]
    return FeatureSet(
        np.hstack([reg.X[reg_rows], cca.X[cca_rows]]),
        reg.y[reg_rows],
        reg.names + cca.names,
        reg.keys[reg_rows],
    )


def select_stacked_features(
    candidates: FeatureSet, m: int, rows: np.ndarray | None = None, tol: float = 1e-3
) -> FeatureSet:
    """
    Keep the regular predictors and the ``m`` best canonical features.

    Canonical features are ranked by ``|w_j|`` (raw units) of a linear SVM with
    ``C = 1`` trained on the canonical columns of `rows` only.

    Parameters
    ----------
    candidates : FeatureSet
        Regular predictors followed by every ``CCA_*`` column.
    m : int
        Canonical features kept.
    rows : numpy.ndarray, optional
        Rows the ranking model may see (default: all).
    tol : float
        SMO tolerance of the ranking model.

    Returns
    -------
    FeatureSet
        Same rows, regular predictors then the chosen canonical features by rank.

    Raises
    ------
    BadK
        Fewer than `m` canonical columns.
    """
    cca_columns = [i for i, name in enumerate(candidates.names) if name.startswith("CCA_")]
    if m > len(cca_columns):
        raise BadK(f"Cannot stack {m} of {len(cca_columns)} CCA features")
    rows = np.arange(len(candidates.y)) if rows is None else np.asarray(rows)

    cca_names = [candidates.names[i] for i in cca_columns]
    X_rank = candidates.X[np.ix_(rows, cca_columns)]
    ranker = svm_train(X_rank, candidates.y[rows], KernelSpec("linear"), 1.0, tol)
    ranked = [name for name, _ in feature_weights(ranker, cca_names)][:m]

    reg_columns = [i for i in range(len(candidates.names)) if i not in cca_columns]
    keep = reg_columns + [cca_columns[cca_names.index(name)] for name in ranked]
    return FeatureSet(
        candidates.X[:, keep],
        candidates.y,
        [candidates.names[i] for i in keep],
        candidates.keys,
    )


def assemble_features(
    study: StudyData,
    variant: ModelVariant | str,
    cca_models: Mapping[str, CcaModel] | None = None,
    *,
    scheme: Scheme = "I",
    reg_features: Sequence[str] = REG_FEATURES,
    tol: float = 1e-3,
    select: bool = True,
) -> FeatureSet:
    """
    Design matrix, labels and feature names of a model variant.

    Rows are labelled respondents with no missing value in the variant's inputs.

    Parameters
    ----------
    study : StudyData
        Harmonized views.
    variant : ModelVariant or str
        Variant.
    cca_models : Mapping[str, CcaModel], optional
        Fitted models per :data:`CCA_PAIRS` key.
    scheme : Scheme
        Labelling scheme.
    reg_features : Sequence[str]
        Regular predictors.
    tol : float
        SMO tolerance of the ranking model used by stacked variants.
    select : bool
        Rank and keep the ``m`` best canonical features of a stacked variant using
        every row. With ``False`` all canonical columns are returned, for
        :func:`select_stacked_features` to choose from after a split.

    Returns
    -------
    FeatureSet
        Features, labels, names and keys.

    Raises
    ------
    MissingView
        A required view is absent.
    UnfittedCca
        No model for a CCA variant's pair.
    BadK
        More components or stacked features requested than available.

    See Also
    --------
    select_stacked_features : Ranking of stacked canonical features.
    """
    variant = ModelVariant.parse(variant)
    signs = _signs(label_respondents(study.view(OUTCOMES), scheme))

    if variant.kind == "REG":
        return _reg_features(study, reg_features, signs)

    candidates = _candidate_features(study, variant, cca_models or {}, signs, reg_features)
    if variant.kind != "REG_PLUS_CCA" or not select:
        return candidates
    return select_stacked_features(candidates, variant.m, tol=tol)


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated experiment settings.

    Parameters
    ----------
    scheme : Scheme
        Labelling scheme, stamped into every report row.
    variants : list[ModelVariant]
        Variants in report order.
    seed : int
        Seed of every split and fold.
    grid : list[GridCell]
        Hyperparameter grid.
    split_fraction : float
        Training share.
    folds : int
        Cross-validation folds.
    ridge : float
        CCA ridge.
    tol : float
        SMO tolerance.
    reg_features : tuple[str, ...]
        Regular predictors.
    n_jobs : int
        Grid-search worker processes.
    """

    scheme: Scheme = "I"
    variants: list[ModelVariant] = field(default_factory=lambda: [ModelVariant("REG")])
    seed: int = 0
    grid: list[GridCell] = field(default_factory=list)
    split_fraction: float = 0.7
    folds: int = 5
    ridge: float = 1e-3
    tol: float = 1e-3
    reg_features: tuple[str, ...] = REG_FEATURES
    n_jobs: int = 1

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | None = None, **overrides: Any) -> ExperimentConfig:
        """
        Validate a configuration mapping and fill defaults.

        Parameters
        ----------
        data : Mapping[str, Any], optional
            ``experiment`` section of a run configuration.
        **overrides : Any
            Values replacing those of `data` (e.g. a command-line seed).

        Returns
        -------
        ExperimentConfig
            Settings.

        Raises
        ------
        ConfigError
            Invalid configuration.
        """
        from nhanes_multiview.schemas import validate

        merged = {**(data or {}), **{key: val for key, val in overrides.items() if val is not None}}
        conf = validate(merged, "experiment")
        return cls(
            scheme=conf["scheme"],
            variants=[ModelVariant.parse(text) for text in conf["variants"]],
            seed=conf["seed"],
            grid=expand_grid(conf["grid"]),
            split_fraction=conf["split_fraction"],
            folds=conf["folds"],
            ridge=conf["ridge"],
            tol=conf["tol"],
            reg_features=tuple(conf.get("reg_features", REG_FEATURES)),
            n_jobs=conf["n_jobs"],
        )


def _components_needed(variants: Sequence[ModelVariant]) -> dict[str, int | None]:
    needed: dict[str, int | None] = {}
    for variant in variants:
        base = variant.base if variant.kind == "REG_PLUS_CCA" else variant
        if base.pair is None:
            continue
        if base.n is None or (base.pair in needed and needed[base.pair] is None):
            needed[base.pair] = None
        else:
            needed[base.pair] = max(base.n, needed.get(base.pair) or 0)
    return needed


def _write_variant_outputs(
    out_dir: Path, variant: ModelVariant, truth: np.ndarray, scores: np.ndarray, search
) -> None:
    from nhanes_multiview.plotting import plot_roc

    curve = roc_curve(truth, scores)
    curve.to_frame().to_csv(
        out_dir / f"roc_{variant.slug}.csv", index=False, float_format="%.6f", lineterminator="\n"
    )
    plot_roc(curve, out_dir / f"roc_{variant.slug}.svg", title=variant.label)
    pd.DataFrame(search.to_rows()).to_csv(
        out_dir / f"grid_{variant.slug}.csv", index=False, float_format="%.6f", lineterminator="\n"
    )


def rank_reg_features(
    features: FeatureSet, train: np.ndarray, search, tol: float
) -> list[tuple[str, float]]:
    """
    Rank regular predictors with the best linear cell of a grid search.

    Parameters
    ----------
    features : FeatureSet
        REG features.
    train : numpy.ndarray
        Training rows.
    search : GridSearchResult
        Grid search over the training rows.
    tol : float
        SMO tolerance.

    Returns
    -------
    list[tuple[str, float]]
        ``(feature, weight)`` by decreasing ``|weight|``; empty if no linear cell succeeded.
    """
    linear = [
        score for score in search.scores if score.cell.kernel == "linear" and score.error is None
    ]
    if not linear:
        return []
    best = max(linear, key=lambda score: (score.mean, -score.cell.C))
    model = svm_train(features.X[train], features.y[train], best.cell.spec, best.cell.C, tol)
    return feature_weights(model, features.names)


def run_experiment(
    study: StudyData,
    config: ExperimentConfig | Mapping[str, Any] | None = None,
    *,
    out_dir: Path | str | None = None,
) -> list[ClassificationReport]:
    """
    Evaluate every configured variant.

    Each variant is assembled, split 70/30 (stratified), grid searched by
    cross-validated AUC on the training part, refitted with the best cell and
    scored on the test part. A failing variant yields a report row carrying the
    failure note.

    Parameters
    ----------
    study : StudyData
        Harmonized views (real or synthetic).
    config : ExperimentConfig or Mapping[str, Any], optional
        Settings (default: all defaults).
    out_dir : Path | str, optional
        Folder for result tables, ROC curves, grid scores, REG ranking and CCA models.

    Returns
    -------
    list[ClassificationReport]
        One row per variant, in configuration order.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    needed = _components_needed(config.variants)
    cca_models: dict[str, CcaModel] = {}
    reports = []

    for variant in config.variants:
        logger.info("Variant %s", variant.label)
        try:
            base = variant.base if variant.kind == "REG_PLUS_CCA" else variant
            if base.pair is not None and base.pair not in cca_models:
                cca_models[base.pair] = fit_view_cca(
                    study, base.pair, needed[base.pair], config.ridge
                )
                if out is not None:
                    cca_models[base.pair].save(out / f"cca_{base.pair.lower()}.json")

            features = assemble_features(
                study,
                variant,
                cca_models,
                scheme=config.scheme,
                reg_features=config.reg_features,
                tol=config.tol,
                select=False,
            )
            train, test = train_test_split(features.y, config.split_fraction, config.seed)
            if variant.kind == "REG_PLUS_CCA":
                features = select_stacked_features(features, variant.m, train, config.tol)
            search = grid_search(
                features.X[train],
                features.y[train],
                config.grid,
                config.seed,
                folds=config.folds,
                tol=config.tol,
                n_jobs=config.n_jobs,
            )
            best = search.best
            model = svm_train(features.X[train], features.y[train], best.spec, best.C, config.tol)
            scores = decision_scores(model, features.X[test])
            report = ClassificationReport.from_scores(
                variant.label,
                features.y[test],
                scores,
                data_size=len(features.y),
                scheme=config.scheme,
                params={"kernel": best.kernel, "C": best.C, "gamma": best.gamma},
                train_size=len(train),
                test_size=len(test),
                cv_auc=search.best_score.mean,
            )

            if out is not None:
                _write_variant_outputs(out, variant, features.y[test], scores, search)
                if variant.kind == "REG":
                    ranking = rank_reg_features(features, train, search, config.tol)
                    pd.DataFrame(ranking, columns=["feature", "weight"]).to_csv(
                        out / "reg_ranking.csv",
                        index=False,
                        float_format="%.6f",
                        lineterminator="\n",
                    )
        except (NhanesMultiviewError, ArithmeticError, ValueError, KeyError) as err:
            logger.error("Variant %s failed: %s", variant.label, err)
            report = ClassificationReport(
                variant.label, scheme=config.scheme, failure=f"{type(err).__name__}: {err}"
            )

        logger.info(
            "%s: N=%d AUC=%.3f", report.model_name, report.data_size, report.auc
        )
        reports.append(report)

    if out is not None:
        write_reports(reports, out)
    return reports
