"""Tests for classification metrics, ROC analysis and weight ranking."""

from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from nhanes_multiview.evaluation import (
    REPORT_COLUMNS,
    ClassificationReport,
    confusion_metrics,
    feature_weights,
    rank_features_by_weight,
    reports_frame,
    roc_auc,
    roc_curve,
    write_reports,
)
from nhanes_multiview.exceptions import LengthMismatch, NotLinearKernel, SingleClass
from nhanes_multiview.linalg import Standardizer
from nhanes_multiview.model import KernelSpec, SvmModel

TRUTH = [-1, -1, 1, 1]
SCORES = [0.1, 0.4, 0.35, 0.8]


def weighted_model(weights, stds=None, kernel=None):
    weights = np.asarray(weights, dtype=float)
    stds = np.ones_like(weights) if stds is None else np.asarray(stds, dtype=float)
    return SvmModel(
        kernel=kernel or KernelSpec(),
        C=1.0,
        support_vectors=weights[None, :],
        dual_coefs=np.array([1.0]),
        bias=0.0,
        standardizer=Standardizer(np.zeros_like(weights), stds, np.zeros(len(weights), bool)),
    )


def test_confusion_ratios():
    truth = [1] * 10 + [-1] * 10
    predicted = [1] * 8 + [-1] * 2 + [-1] * 7 + [1] * 3
    metrics = confusion_metrics(truth, predicted)

    assert (metrics.tp, metrics.fn, metrics.tn, metrics.fp) == (8, 2, 7, 3)
    assert metrics.sensitivity == pytest.approx(0.8)
    assert metrics.specificity == pytest.approx(0.7)
    assert metrics.ppv == pytest.approx(8 / 11)
    assert metrics.npv == pytest.approx(7 / 9)
    assert metrics.undefined == ()


def test_confusion_undefined():
    metrics = confusion_metrics([-1, -1, -1], [-1, -1, -1])
    assert np.isnan(metrics.sensitivity)
    assert np.isnan(metrics.ppv)
    assert metrics.specificity == 1.0
    assert metrics.undefined == ("sensitivity", "ppv")


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion_metrics([1, -1], [1])
    with pytest.raises(LengthMismatch):
        confusion_metrics([], [])


def test_auc_examples():
    assert roc_auc(TRUTH, SCORES) == pytest.approx(0.75)
    assert roc_auc(TRUTH, [4.0, 3.0, 2.0, 1.0]) == 0.0
    assert roc_auc(TRUTH, [1.0, 2.0, 3.0, 4.0]) == 1.0
    assert roc_auc(TRUTH, [0.5] * 4) == 0.5


def test_auc_properties(rng):
    truth = np.where(rng.random(200) < 0.3, 1, -1)
    scores = np.round(rng.normal(size=200) + 0.8 * truth, 1)

    auc = roc_auc(truth, scores)
    assert 0.0 <= auc <= 1.0
    assert roc_auc(truth, np.exp(scores)) == pytest.approx(auc)
    assert roc_auc(truth, 3 * scores - 7) == pytest.approx(auc)
    assert auc + roc_auc(truth, -scores) == pytest.approx(1.0)
    assert roc_curve(truth, scores).area() == pytest.approx(auc, abs=1e-12)


def pairwise_auc(truth, scores):
    """Fraction of positive/negative pairs ordered correctly, ties counting half."""
    pos, neg = scores[truth > 0], scores[truth < 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def test_auc_matches_pair_counting(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 61))
        truth = np.where(rng.random(n) < rng.uniform(0.1, 0.9), 1, -1)
        truth[:2] = [1, -1]
        scores = rng.integers(0, int(rng.integers(1, 8)), size=n) * rng.uniform(0.1, 10)
        assert roc_auc(truth, scores) == pairwise_auc(truth, scores)


def test_auc_needs_both_classes():
    with pytest.raises(SingleClass):
        roc_auc([1, 1], [0.2, 0.3])
    with pytest.raises(LengthMismatch):
        roc_auc([1, -1], [0.2])


def test_roc_curve_points():
    curve = roc_curve(TRUTH, SCORES)
    assert curve.fpr[0] == 0.0 and curve.tpr[0] == 0.0
    assert curve.fpr[-1] == 1.0 and curve.tpr[-1] == 1.0
    assert np.isinf(curve.thresholds[0])
    assert curve.thresholds[1:].tolist() == [0.8, 0.4, 0.35, 0.1]
    assert np.all(np.diff(curve.fpr) >= 0)
    assert np.all(np.diff(curve.tpr) >= 0)
    assert curve.to_frame().columns.tolist() == ["threshold", "fpr", "tpr"]


def test_roc_curve_merges_ties():
    curve = roc_curve([1, -1, 1, -1], [0.5, 0.5, 0.2, 0.1])
    assert len(curve.fpr) == 4
    assert (curve.fpr[1], curve.tpr[1]) == (0.5, 0.5)


def test_feature_ranking():
    model = weighted_model([0.1, -2.0])
    assert rank_features_by_weight(model, ["A", "B"]) == ["B", "A"]
    assert feature_weights(model, ["A", "B"]) == [("B", -2.0), ("A", 0.1)]


def test_feature_ranking_raw_units():
    model = weighted_model([0.1, -2.0], stds=[0.01, 1.0])
    assert rank_features_by_weight(model, ["A", "B"]) == ["A", "B"]
    assert rank_features_by_weight(model, ["A", "B"], standardized=True) == ["B", "A"]


def test_feature_ranking_ties_alphabetical():
    model = weighted_model([1.0, -1.0, 0.5])
    assert rank_features_by_weight(model, ["Z", "M", "A"]) == ["M", "Z", "A"]


def test_feature_ranking_errors():
    with pytest.raises(NotLinearKernel):
        rank_features_by_weight(weighted_model([1.0, 2.0], kernel=KernelSpec("rbf", 1.0)), "AB")
    with pytest.raises(LengthMismatch):
        feature_weights(weighted_model([1.0, 2.0]), ["A"])


def test_report_from_scores():
    scores = np.array(SCORES) - 0.5
    report = ClassificationReport.from_scores(
        "REG", TRUTH, scores, data_size=40, params={"kernel": "linear", "C": 1.0}
    )
    assert report.counts == {"tp": 1, "fp": 0, "tn": 2, "fn": 1}
    assert report.sensitivity == 0.5
    assert report.specificity == 1.0
    assert report.npv == pytest.approx(2 / 3)
    assert report.auc == pytest.approx(0.75)

    row = report.to_row()
    assert list(row) == list(REPORT_COLUMNS)
    assert row["model"] == "REG"
    assert row["kernel"] == "linear"
    assert row["gamma"] is None
    assert row["tp"] == 1
    assert row["undefined"] == ""


def test_failure_report_row():
    row = ClassificationReport("CCA_DL(15)", failure="SingleClass: no positives").to_row()
    assert row["failure"] == "SingleClass: no positives"
    assert np.isnan(row["auc"])
    assert row["tp"] is None


def test_write_reports(tmp_path):
    reports = [
        ClassificationReport.from_scores("REG", TRUTH, SCORES, data_size=4, scheme="DIAGNOSED"),
        ClassificationReport("CCA_BL", failure="MissingView: body_measures"),
    ]
    csv_path, json_path = write_reports(reports, tmp_path / "out")

    frame = pd.read_csv(csv_path)
    assert frame.columns.tolist() == list(REPORT_COLUMNS)
    assert frame["model"].tolist() == ["REG", "CCA_BL"]
    assert frame["auc"].iloc[0] == pytest.approx(0.75)
    assert frame["failure"].iloc[1] == "MissingView: body_measures"

    rows = json.loads(json_path.read_text())
    assert rows[0]["undefined"] == ["npv"]
    assert rows[1]["auc"] is None
    assert rows[1]["failure"] == "MissingView: body_measures"
    assert reports_frame(reports).shape == (2, len(REPORT_COLUMNS))
