"""Reproducible SVG figures for histograms and ROC curves."""

from __future__ import annotations

from collections.abc import Mapping
import logging
from pathlib import Path

import matplotlib as mpl
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from nhanes_multiview.evaluation import RocCurve
from nhanes_multiview.harmonize import Histogram

logger = logging.getLogger(__name__)

# Fixed element ids and no timestamp, so equal data gives byte-identical files.
SVG_STYLE = {"svg.hashsalt": "nhanes-multiview", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None}


def _save(fig: Figure, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    with mpl.rc_context(SVG_STYLE):
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    logger.debug("Wrote %s", path)
    return path


def plot_histogram(
    hist: Histogram, path: Path | str, *, title: str = "", xlabel: str = ""
) -> Path:
    """
    Draw a histogram, one outline per group when grouped.

    Parameters
    ----------
    hist : Histogram
        Binned counts.
    path : Path | str
        SVG destination.
    title : str
        Axes title.
    xlabel : str
        Horizontal axis label.

    Returns
    -------
    Path
        Written file.
    """
    with mpl.rc_context(SVG_STYLE):
        fig = Figure(figsize=(6, 4))
        ax = fig.add_subplot()
        if len(hist.edges):
            if hist.groups:
                for label, counts in hist.groups.items():
                    ax.stairs(counts, hist.edges, label=label)
                ax.legend()
            else:
                ax.stairs(hist.counts, hist.edges, fill=True)
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("Count")
    return _save(fig, path)


def plot_roc(
    curve: RocCurve | Mapping[str, RocCurve], path: Path | str, *, title: str = ""
) -> Path:
    """
    Draw one or several ROC curves with their areas.

    Parameters
    ----------
    curve : RocCurve or Mapping[str, RocCurve]
        Curve, or curves by legend label.
    path : Path | str
        SVG destination.
    title : str
        Axes title; also the legend label of a single curve.

    Returns
    -------
    Path
        Written file.
    """
    curves = {title or "model": curve} if isinstance(curve, RocCurve) else dict(curve)
    with mpl.rc_context(SVG_STYLE):
        fig = Figure(figsize=(5, 5))
        ax = fig.add_subplot()
        for label, roc in curves.items():
            ax.plot(roc.fpr, roc.tpr, label=f"{label} (AUC = {roc.area():.3f})")
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title(title)
        ax.legend(loc="lower right")
    return _save(fig, path)
