"""Tests for the generated stand-in study."""

from __future__ import annotations

import numpy as np
import pytest

from nhanes_multiview.harmonize import DEFAULT_RULES, load_rules
from nhanes_multiview.synthetic import CORRELATIONS, paired_views, synthetic_study
from nhanes_multiview.task import (
    BODY_MEASURES,
    DEMOGRAPHICS,
    LABORATORY,
    OUTCOMES,
    SMOKING,
    DiabetesLabel,
    label_respondents,
)


def test_paired_views_shapes():
    views = paired_views(100, dx=5, dy=4, seed=1)
    assert views.X.shape == (100, 5)
    assert views.Y.shape == (100, 4)
    assert views.latent_x.shape == views.latent_y.shape == (100, len(CORRELATIONS))


def test_latent_correlations():
    views = paired_views(20000, seed=2)
    observed = [
        np.corrcoef(views.latent_x[:, i], views.latent_y[:, i])[0, 1]
        for i in range(len(CORRELATIONS))
    ]
    np.testing.assert_allclose(observed, CORRELATIONS, atol=0.03)


def test_paired_views_width_check():
    with pytest.raises(ValueError, match="at least 3"):
        paired_views(10, dx=2)


def test_study_views_follow_rules(small_study):
    rules = load_rules(DEFAULT_RULES)
    assert set(small_study.views) == {DEMOGRAPHICS, BODY_MEASURES, LABORATORY, SMOKING, OUTCOMES}
    for name, view in rules.items():
        assert small_study.variables(name) == [rule.target for rule in view.rules]
        assert small_study.view_kinds(name) == view.kinds


def test_study_coverage(small_study):
    n = len(small_study.view(DEMOGRAPHICS))
    assert n == 1500
    assert 0.5 * n < len(small_study.view(LABORATORY)) < 0.7 * n
    smokers = small_study.view(SMOKING).keys
    outcomes = small_study.view(OUTCOMES)
    is_smoker = outcomes.column("SMOKER").to_numpy() == 1
    assert set(smokers) == set(outcomes.keys[is_smoker])
    assert set(small_study.view(DEMOGRAPHICS).provenance) >= {"1999-2000", "2013-2014"}


def test_study_has_both_classes(small_study):
    labels = label_respondents(small_study.view(OUTCOMES), "I")
    counts = labels.value_counts()
    assert counts[DiabetesLabel.CASE] > 50
    assert counts[DiabetesLabel.NON_CASE] > counts[DiabetesLabel.CASE]


def test_study_deterministic():
    first = synthetic_study(200, seed=5)
    again = synthetic_study(200, seed=5)
    other = synthetic_study(200, seed=6)
    for name in first.views:
        assert first.view(name).equals(again.view(name))
    assert not first.view(BODY_MEASURES).equals(other.view(BODY_MEASURES))
