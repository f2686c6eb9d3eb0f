"""Tests for labelling, variant handling, feature assembly and the experiment run."""

from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from nhanes_multiview.evaluation import reports_frame
from nhanes_multiview.exceptions import BadK, ConfigError, MissingView, UnfittedCca
from nhanes_multiview.model import GridCell, train_test_split
from nhanes_multiview.table import ColumnTable
from nhanes_multiview.task import (
    LABORATORY,
    OUTCOMES,
    REG_FEATURES,
    DiabetesLabel,
    ExperimentConfig,
    FeatureSet,
    ModelVariant,
    StudyData,
    assemble_features,
    assign_diabetes_label,
    fit_view_cca,
    label_respondents,
    run_experiment,
    select_stacked_features,
)

CASE, NON_CASE, EXCLUDED = DiabetesLabel.CASE, DiabetesLabel.NON_CASE, DiabetesLabel.EXCLUDED

SMALL_GRID = {"kernels": ["linear"], "C": [1.0]}


#: Representative glucose per band: below 100, pre-diabetic, diabetic, missing.
FPG_BANDS = {"low": 90.0, "pre": 110.0, "high": 130.0, "missing": None}

LABEL_TABLE = {
    "I": {
        True: {"low": CASE, "pre": CASE, "high": CASE, "missing": CASE},
        False: {"low": NON_CASE, "pre": NON_CASE, "high": CASE, "missing": EXCLUDED},
        None: {"low": EXCLUDED, "pre": EXCLUDED, "high": EXCLUDED, "missing": EXCLUDED},
    },
    "II": {
        True: {"low": EXCLUDED, "pre": EXCLUDED, "high": EXCLUDED, "missing": EXCLUDED},
        False: {"low": NON_CASE, "pre": CASE, "high": CASE, "missing": EXCLUDED},
        None: {"low": EXCLUDED, "pre": EXCLUDED, "high": EXCLUDED, "missing": EXCLUDED},
    },
}


@pytest.mark.parametrize("scheme", ["I", "II"])
@pytest.mark.parametrize("diagnosed", [True, False, None])
@pytest.mark.parametrize("band", list(FPG_BANDS))
def test_label_truth_table(diagnosed, band, scheme):
    expected = LABEL_TABLE[scheme][diagnosed][band]
    assert assign_diabetes_label(diagnosed, FPG_BANDS[band], scheme) is expected


@pytest.mark.parametrize(
    ("diagnosed", "fpg", "scheme", "expected"),
    [
        (False, 126.0, "I", CASE),
        (False, 125.9, "I", NON_CASE),
        (False, 100.0, "II", CASE),
        (False, 99.9, "II", NON_CASE),
        (float("nan"), 130.0, "I", EXCLUDED),
        (False, float("nan"), "II", EXCLUDED),
        (1.0, None, "I", CASE),
        (0.0, 80.0, "II", NON_CASE),
    ],
)
def test_label_boundaries_and_encodings(diagnosed, fpg, scheme, expected):
    assert assign_diabetes_label(diagnosed, fpg, scheme) is expected


def test_scheme_two_widens_cases():
    for fpg in np.arange(60.0, 200.0, 0.5):
        if assign_diabetes_label(False, fpg, "I") is CASE:
            assert assign_diabetes_label(False, fpg, "II") is CASE


def test_unknown_scheme():
    with pytest.raises(ConfigError):
        assign_diabetes_label(False, 100.0, "III")


def test_label_respondents():
    outcomes = ColumnTable.from_columns(
        {"SEQN": [5, 6, 7], "DIAGNOSED": [1.0, 0.0, None], "FPG": [None, 101.0, 140.0]}
    )
    labels = label_respondents(outcomes, "I")
    assert labels.index.tolist() == [5.0, 6.0, 7.0]
    assert labels.tolist() == [CASE, NON_CASE, EXCLUDED]
    assert label_respondents(outcomes, "II").tolist() == [EXCLUDED, CASE, EXCLUDED]


@pytest.mark.parametrize(
    ("text", "label", "config", "slug"),
    [
        ("REG", "REG", "REG", "reg"),
        ("CCA_DL(15)", "CCA-DL-15", "CCA_DL(15)", "cca_dl_15"),
        ("CCA_DL_ALL(15)", "CCA-DL-15-ALL", "CCA_DL_ALL(15)", "cca_dl_15_all"),
        ("CCA_BL", "CCA-BL", "CCA_BL", "cca_bl"),
        ("CCA-BL-6", "CCA-BL-6", "CCA_BL(6)", "cca_bl_6"),
        (
            "REG_PLUS_CCA(5, CCA_DL_ALL(15))",
            "REG+[CCA-DL-15-ALL]-5",
            "REG_PLUS_CCA(5, CCA_DL_ALL(15))",
            "reg_cca_dl_15_all_5",
        ),
    ],
)
def test_variant_names(text, label, config, slug):
    variant = ModelVariant.parse(text)
    assert variant.label == label
    assert str(variant) == config
    assert variant.slug == slug
    assert ModelVariant.parse(variant.label) == variant
    assert ModelVariant.parse(str(variant)) == variant


def test_variant_properties():
    stacked = ModelVariant.parse("REG_PLUS_CCA(10, CCA_DL_ALL(15))")
    assert stacked.pair is None
    assert stacked.base.pair == "DL"
    assert stacked.base.all_rows
    assert ModelVariant.parse(stacked) is stacked


@pytest.mark.parametrize(
    "text",
    [
        "CCA_DL",
        "FOO",
        "CCA_DL(x)",
        "CCA_BL(0)",
        "REG_PLUS_CCA(0, CCA_DL(3))",
        "REG_PLUS_CCA(2, REG)",
    ],
)
def test_bad_variants(text):
    with pytest.raises(ConfigError):
        ModelVariant.parse(text)


def test_experiment_config():
    config = ExperimentConfig.from_dict({"seed": 4, "grid": SMALL_GRID}, seed=None, scheme="II")
    assert config.seed == 4
    assert config.scheme == "II"
    assert config.grid == [GridCell("linear", 1.0)]
    assert config.split_fraction == 0.7
    assert config.ridge == 1e-3
    assert config.reg_features == REG_FEATURES
    assert len(ExperimentConfig.from_dict().variants) == 7

    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scheme": "III"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"variants": ["CCA_DL"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"folds": 1})


@pytest.fixture(scope="module")
def dl_model(small_study):
    return fit_view_cca(small_study, "DL", 15, 1e-3)


def test_fit_view_cca(dl_model, small_study):
    assert dl_model.k == 15
    assert dl_model.names_y == small_study.variables(LABORATORY)
    assert "RACE" in dl_model.encoding_x
    assert np.all(np.diff(dl_model.correlations) <= 0)


def test_reg_features(small_study):
    features = assemble_features(small_study, "REG")
    assert features.names == list(REG_FEATURES)
    assert features.X.shape == (len(features.y), 14)
    assert not np.isnan(features.X).any()
    assert set(np.unique(features.y)) == {-1, 1}
    assert len(np.unique(features.keys)) == len(features.keys)


def test_cca_features(small_study, dl_model):
    paired = assemble_features(small_study, "CCA_DL(15)", {"DL": dl_model})
    assert paired.X.shape[1] == 15
    assert paired.names[0] == "CCA_DL_1"

    everyone = assemble_features(small_study, "CCA_DL_ALL(15)", {"DL": dl_model})
    assert len(everyone.keys) > len(paired.keys)
    rows = pd.Index(everyone.keys).get_indexer(paired.keys)
    assert (rows >= 0).all()
    np.testing.assert_allclose(everyone.X[rows], paired.X, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(everyone.y[rows], paired.y)

    fewer = assemble_features(small_study, "CCA_DL(4)", {"DL": dl_model})
    np.testing.assert_allclose(fewer.X, paired.X[:, :4], rtol=1e-12, atol=1e-12)


def test_stacked_features(small_study, dl_model):
    stacked = assemble_features(small_study, "REG_PLUS_CCA(5, CCA_DL_ALL(15))", {"DL": dl_model})
    assert stacked.X.shape[1] == 19
    assert stacked.names[:14] == list(REG_FEATURES)
    assert all(name.startswith("CCA_DL_") for name in stacked.names[14:])

    reg = assemble_features(small_study, "REG")
    rows = pd.Index(reg.keys).get_indexer(stacked.keys)
    np.testing.assert_array_equal(stacked.X[:, :14], reg.X[rows])
    assert np.all(np.diff(rows) > 0)


def test_stacked_candidates(small_study, dl_model):
    candidates = assemble_features(
        small_study, "REG_PLUS_CCA(5, CCA_DL_ALL(15))", {"DL": dl_model}, select=False
    )
    assert candidates.X.shape[1] == 14 + 15
    chosen = select_stacked_features(candidates, 5)
    stacked = assemble_features(small_study, "REG_PLUS_CCA(5, CCA_DL_ALL(15))", {"DL": dl_model})
    assert chosen.names == stacked.names
    np.testing.assert_array_equal(chosen.X, stacked.X)


def test_stacked_selection_ignores_held_out_labels(small_study, dl_model):
    candidates = assemble_features(
        small_study, "REG_PLUS_CCA(5, CCA_DL_ALL(15))", {"DL": dl_model}, select=False
    )
    train, test = train_test_split(candidates.y, 0.7, seed=0)
    chosen = select_stacked_features(candidates, 5, train)

    flipped_y = candidates.y.copy()
    flipped_y[test] *= -1
    again = select_stacked_features(candidates._replace(y=flipped_y), 5, train)

    assert again.names == chosen.names
    np.testing.assert_array_equal(again.X, chosen.X)
    np.testing.assert_array_equal(chosen.keys, candidates.keys)


def test_stacked_selection_ranks_raw_weights(rng):
    y = np.where(rng.random(200) < 0.5, 1, -1)
    X = np.column_stack(
        [
            rng.normal(40.0, 10.0, 200),
            100.0 * (y + rng.normal(size=200)),
            0.001 * (0.5 * y + rng.normal(size=200)),
        ]
    )
    candidates = FeatureSet(X, y, ["AGE", "CCA_DL_1", "CCA_DL_2"], np.arange(200))

    chosen = select_stacked_features(candidates, 1)

    assert chosen.names == ["AGE", "CCA_DL_2"]
    np.testing.assert_array_equal(chosen.X, X[:, [0, 2]])


def test_stacked_selection_too_many(small_study, dl_model):
    candidates = assemble_features(
        small_study, "REG_PLUS_CCA(2, CCA_DL_ALL(3))", {"DL": dl_model}, select=False
    )
    with pytest.raises(BadK):
        select_stacked_features(candidates, 4)


def test_feature_errors(small_study, dl_model):
    with pytest.raises(UnfittedCca):
        assemble_features(small_study, "CCA_DL(3)")
    with pytest.raises(BadK):
        assemble_features(small_study, "CCA_DL(16)", {"DL": dl_model})
    with pytest.raises(BadK):
        assemble_features(small_study, "REG_PLUS_CCA(16, CCA_DL(15))", {"DL": dl_model})

    no_lab = StudyData(
        {name: view for name, view in small_study.views.items() if name != LABORATORY},
        small_study.kinds,
    )
    with pytest.raises(MissingView):
        fit_view_cca(no_lab, "DL", 3, 1e-3)
    with pytest.raises(MissingView):
        assemble_features(no_lab, "CCA_DL(3)", {"DL": dl_model})
    assert assemble_features(no_lab, "CCA_DL_ALL(3)", {"DL": dl_model}).X.shape[1] == 3


def test_study_round_trip(small_study, tmp_path):
    small_study.write(tmp_path)
    back = StudyData.from_dir(tmp_path)
    assert sorted(back.views) == sorted(small_study.views)
    kinds = back.view_kinds(OUTCOMES)
    assert all(kinds[name] == kind for name, kind in small_study.view_kinds(OUTCOMES).items())
    assert len(back.view(LABORATORY)) == len(small_study.view(LABORATORY))
    with pytest.raises(MissingView):
        StudyData.from_dir(tmp_path / "absent")


VARIANTS = ["REG", "CCA_DL(3)", "CCA_DL_ALL(3)", "REG_PLUS_CCA(2, CCA_DL_ALL(3))"]


@pytest.fixture(scope="module")
def experiment(small_study, tmp_path_factory):
    out = tmp_path_factory.mktemp("experiment")
    config = {"variants": VARIANTS, "grid": SMALL_GRID}
    return run_experiment(small_study, config, out_dir=out), out


def test_experiment_reports(experiment):
    reports, _ = experiment
    assert [report.model_name for report in reports] == [
        "REG",
        "CCA-DL-3",
        "CCA-DL-3-ALL",
        "REG+[CCA-DL-3-ALL]-2",
    ]
    assert all(report.failure is None for report in reports)
    assert all(report.scheme == "I" for report in reports)

    reg, paired, everyone, _ = reports
    assert reg.auc > 0.8
    assert paired.auc > 0.7
    assert everyone.data_size > paired.data_size
    assert reg.train_size + reg.test_size == reg.data_size
    assert reg.params == {"kernel": "linear", "C": 1.0, "gamma": None}


def test_experiment_outputs(experiment):
    _, out = experiment
    for name in (
        "results.csv",
        "results.json",
        "roc_reg.csv",
        "roc_reg.svg",
        "grid_reg.csv",
        "reg_ranking.csv",
        "cca_dl.json",
        "roc_cca_dl_3_all.svg",
    ):
        assert (out / name).exists(), name

    ranking = pd.read_csv(out / "reg_ranking.csv")
    assert sorted(ranking["feature"]) == sorted(REG_FEATURES)
    assert len(json.loads((out / "results.json").read_text())) == 4


def test_experiment_deterministic(experiment, small_study):
    reports, _ = experiment
    again = run_experiment(small_study, {"variants": ["REG"], "grid": SMALL_GRID})
    assert reports_frame(again).equals(reports_frame(reports[:1]))


def test_experiment_failure_rows(small_study):
    no_lab = StudyData(
        {name: view for name, view in small_study.views.items() if name != LABORATORY},
        small_study.kinds,
    )
    reports = run_experiment(no_lab, {"variants": ["CCA_BL(2)"], "grid": SMALL_GRID})
    assert len(reports) == 1
    assert reports[0].failure.startswith("MissingView")
    assert np.isnan(reports[0].auc)
