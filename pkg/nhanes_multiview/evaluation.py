"""Clinical classification metrics, ROC analysis and linear-model feature ranking."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from nhanes_multiview.dumpers import dump_file
from nhanes_multiview.exceptions import LengthMismatch, SingleClass
from nhanes_multiview.pca import Loadings, rank_loadings

if TYPE_CHECKING:
    from nhanes_multiview.model import SvmModel

logger = logging.getLogger(__name__)

#: Report columns in output order.
REPORT_COLUMNS = (
    "model",
    "scheme",
    "data_size",
    "sensitivity",
    "specificity",
    "ppv",
    "npv",
    "auc",
    "tp",
    "fp",
    "tn",
    "fn",
    "train_size",
    "test_size",
    "kernel",
    "C",
    "gamma",
    "cv_auc",
    "undefined",
    "failure",
)


def _paired(truth: Any, other: Any, what: str) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=float).ravel()
    other = np.asarray(other, dtype=float).ravel()
    if len(truth) != len(other):
        raise LengthMismatch(f"{len(truth)} labels but {len(other)} {what}")
    return truth, other


@dataclass(frozen=True)
class ConfusionMetrics:
    """
    Confusion counts and the four clinical ratios.

    Ratios with a zero denominator are ``NaN`` and named in :attr:`undefined`.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    sensitivity: float
    specificity: float
    ppv: float
    npv: float
    undefined: tuple[str, ...] = ()


def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


def confusion_metrics(truth: Any, predicted: Any) -> ConfusionMetrics:
    """
    Sensitivity, specificity, PPV and NPV of ``+1``/``-1`` predictions.

    Parameters
    ----------
    truth : array_like
        True labels.
    predicted : array_like
        Predicted labels.

    Returns
    -------
    ConfusionMetrics
        Counts and ratios.

    Raises
    ------
    LengthMismatch
        Inputs differ in length or are empty.

    Examples
    --------
    >>> metrics = confusion_metrics([1, 1, -1, -1], [1, -1, -1, -1])
    >>> metrics.sensitivity, metrics.specificity
    (0.5, 1.0)
    """
    truth, predicted = _paired(truth, predicted, "predictions")
    if not len(truth):
        raise LengthMismatch("Cannot score empty label vectors")

    pos, hit = truth > 0, predicted > 0
    tp = int(np.sum(pos & hit))
    fn = int(np.sum(pos & ~hit))
    tn = int(np.sum(~pos & ~hit))
    fp = int(np.sum(~pos & hit))

    ratios = {
        "sensitivity": _ratio(tp, tp + fn),
        "specificity": _ratio(tn, tn + fp),
        "ppv": _ratio(tp, tp + fp),
        "npv": _ratio(tn, tn + fn),
    }
    undefined = tuple(name for name, value in ratios.items() if np.isnan(value))
    return ConfusionMetrics(tp, fp, tn, fn, **ratios, undefined=undefined)


def roc_auc(truth: Any, scores: Any) -> float:
    """
    Area under the ROC curve as the Mann-Whitney statistic.

    Positive/negative pairs with tied scores earn half credit.

    Parameters
    ----------
    truth : array_like
        ``+1``/``-1`` labels.
    scores : array_like
        Scores, higher meaning more positive.

    Returns
    -------
    float
        AUC in ``[0, 1]``.

    Raises
    ------
    SingleClass
        Only one class present.
    LengthMismatch
        Inputs differ in length.

    Examples
    --------
    >>> roc_auc([-1, -1, 1, 1], [0.1, 0.4, 0.35, 0.8])
    0.75
    """
    truth, scores = _paired(truth, scores, "scores")
    pos = truth > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if not n_pos or not n_neg:
        raise SingleClass(f"AUC needs both classes, got {n_pos} positive and {n_neg} negative")

    ranks = rankdata(scores, method="average")
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


class RocCurve(NamedTuple):
    """ROC points at every distinct threshold, from ``(0, 0)`` to ``(1, 1)``."""

    #: False positive rates.
    fpr: np.ndarray
    #: True positive rates.
    tpr: np.ndarray
    #: Score threshold reached at each point (``inf`` for the origin).
    thresholds: np.ndarray

    def area(self) -> float:
        """
        Trapezoidal area under the points.

        Returns
        -------
        float
            Area, equal to :func:`roc_auc` up to rounding.
        """
        return float(np.sum(np.diff(self.fpr) * (self.tpr[1:] + self.tpr[:-1]) / 2))

    def to_frame(self) -> pd.DataFrame:
        """
        Tabular form.

        Returns
        -------
        pandas.DataFrame
            ``threshold``, ``fpr``, ``tpr`` columns.
        """
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def roc_curve(truth: Any, scores: Any) -> RocCurve:
    """
    ROC point list for plotting.

    Parameters
    ----------
    truth : array_like
        ``+1``/``-1`` labels.
    scores : array_like
        Scores.

    Returns
    -------
    RocCurve
        One point per distinct score plus the origin.

    Raises
    ------
    SingleClass
        Only one class present.
    """
    truth, scores = _paired(truth, scores, "scores")
    pos = truth > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if not n_pos or not n_neg:
        raise SingleClass(f"ROC needs both classes, got {n_pos} positive and {n_neg} negative")

    order = np.argsort(-scores, kind="stable")
    ordered, hits = scores[order], pos[order]
    tps = np.cumsum(hits)
    fps = np.cumsum(~hits)
    # Last index of each run of equal scores.
    ends = np.flatnonzero(np.r_[ordered[1:] != ordered[:-1], True])

    return RocCurve(
        fpr=np.r_[0.0, fps[ends] / n_neg],
        tpr=np.r_[0.0, tps[ends] / n_pos],
        thresholds=np.r_[np.inf, ordered[ends]],
    )


def feature_weights(
    model: SvmModel, names: Sequence[str], *, standardized: bool = False
) -> Loadings:
    """
    Named linear-SVM weights, largest magnitude first, ties alphabetical.

    Parameters
    ----------
    model : SvmModel
        Linear model.
    names : Sequence[str]
        One name per feature.
    standardized : bool
        Rank weights in standardized space instead of raw units.

    Returns
    -------
    Loadings
        Sorted ``(name, weight)`` pairs.

    Raises
    ------
    NotLinearKernel
        Model kernel is not linear.
    LengthMismatch
        Name count differs from feature count.
    """
    weights, unscaled = model.linear_weights()
    if len(names) != len(weights):
        raise LengthMismatch(f"{len(names)} names for {len(weights)} features")
    return rank_loadings(weights if standardized else unscaled, names)


def rank_features_by_weight(
    model: SvmModel, names: Sequence[str], *, standardized: bool = False
) -> list[str]:
    """
    Feature names ordered by ``|w_j|`` of a linear SVM, in raw feature units.

    Parameters
    ----------
    model : SvmModel
        Linear model.
    names : Sequence[str]
        One name per feature.
    standardized : bool
        Rank weights in standardized space instead of raw units.

    Returns
    -------
    list[str]
        Names, most important first.

    Raises
    ------
    NotLinearKernel
        Model kernel is not linear.
    """
    return [name for name, _ in feature_weights(model, names, standardized=standardized)]


@dataclass(frozen=True)
class ClassificationReport:
    """
    One result row: data size, clinical ratios and AUC of a model variant.

    Parameters
    ----------
    model_name : str
        Variant display name.
    data_size : int
        Complete-case rows the variant used.
    sensitivity, specificity, ppv, npv, auc : float
        Test-set metrics, ``NaN`` if undefined.
    scheme : str
        Labeling scheme.
    counts : dict[str, int]
        Test confusion counts.
    params : dict[str, Any]
        Selected hyperparameters.
    train_size, test_size : int
        Split sizes.
    cv_auc : float
        Mean cross-validated AUC of the chosen cell.
    undefined : tuple[str, ...]
        Metrics with zero denominators.
    failure : str, optional
        Failure note when the variant could not be evaluated.
    """

    model_name: str
    data_size: int = 0
    sensitivity: float = float("nan")
    specificity: float = float("nan")
    ppv: float = float("nan")
    npv: float = float("nan")
    auc: float = float("nan")
    scheme: str = ""
    counts: dict[str, int] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    train_size: int = 0
    test_size: int = 0
    cv_auc: float = float("nan")
    undefined: tuple[str, ...] = ()
    failure: str | None = None

    @classmethod
    def from_scores(
        cls,
        model_name: str,
        truth: Any,
        scores: Any,
        *,
        data_size: int,
        **extra: Any,
    ) -> ClassificationReport:
        """
        Build a report from test labels and decision scores.

        Predictions are ``+1`` where the score is non-negative.

        Parameters
        ----------
        model_name : str
            Variant display name.
        truth : array_like
            Test labels.
        scores : array_like
            Test decision scores.
        data_size : int
            Complete-case size of the variant.
        **extra : Any
            Other report fields.

        Returns
        -------
        ClassificationReport
            Report.
        """
        scores = np.asarray(scores, dtype=float)
        metrics = confusion_metrics(truth, np.where(scores >= 0, 1, -1))
        return cls(
            model_name=model_name,
            data_size=data_size,
            sensitivity=metrics.sensitivity,
            specificity=metrics.specificity,
            ppv=metrics.ppv,
            npv=metrics.npv,
            auc=roc_auc(truth, scores),
            counts={"tp": metrics.tp, "fp": metrics.fp, "tn": metrics.tn, "fn": metrics.fn},
            undefined=metrics.undefined,
            **extra,
        )

    def to_row(self) -> dict[str, Any]:
        """
        Flat row keyed by :data:`REPORT_COLUMNS`.

        Returns
        -------
        dict[str, Any]
            Report row.
        """
        data = asdict(self)
        row = {
            "model": data.pop("model_name"),
            **{key: data["counts"].get(key) for key in ("tp", "fp", "tn", "fn")},
            "kernel": data["params"].get("kernel"),
            "C": data["params"].get("C"),
            "gamma": data["params"].get("gamma"),
            "undefined": ";".join(data["undefined"]),
        }
        row |= {key: data[key] for key in REPORT_COLUMNS if key in data and key not in row}
        return {key: row.get(key) for key in REPORT_COLUMNS}


def reports_frame(reports: Sequence[ClassificationReport]) -> pd.DataFrame:
    """
    Report rows as a table.

    Parameters
    ----------
    reports : Sequence[ClassificationReport]
        Rows in output order.

    Returns
    -------
    pandas.DataFrame
        One row per report, :data:`REPORT_COLUMNS` order.
    """
    return pd.DataFrame([report.to_row() for report in reports], columns=list(REPORT_COLUMNS))


def write_reports(reports: Sequence[ClassificationReport], out_dir: Path | str) -> list[Path]:
    """
    Write report rows as CSV and JSON.

    Parameters
    ----------
    reports : Sequence[ClassificationReport]
        Rows in output order.
    out_dir : Path | str
        Output folder.

    Returns
    -------
    list[Path]
        ``results.csv`` and ``results.json`` paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = reports_frame(reports)
    csv_path = out_dir / "results.csv"
    frame.to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
    json_path = dump_file(
        [
            {
                key: (None if isinstance(val, float) and np.isnan(val) else val)
                for key, val in asdict(report).items()
            }
            for report in reports
        ],
        out_dir / "results.json",
    )
    logger.info("Wrote %d report row(s) to %s", len(reports), csv_path)
    return [csv_path, json_path]
