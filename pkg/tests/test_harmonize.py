"""Tests for rule-driven harmonization and view utilities."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from nhanes_multiview.exceptions import (
    ConfigError,
    DuplicateKey,
    NonPositiveBinWidth,
    RecodeDomainError,
    RuleConflict,
    UnknownColumn,
)
from nhanes_multiview.harmonize import (
    HarmonizationRule,
    ViewRules,
    apply_rules,
    build_views,
    complete_cases,
    histogram,
    join_views,
    load_raw_cycles,
    load_rules,
    read_view,
    summarize,
    to_design_matrix,
    write_view,
)
from nhanes_multiview.ingest import ComponentRef, CycleId
from nhanes_multiview.table import ColumnTable, Missing
from tests.xport_writer import write_xport

RULES = [
    {"target": "AGE", "sources": {"*": "RIDAGEYR"}},
    {
        "target": "GENDER",
        "sources": {"*": "RIAGENDR"},
        "kind": "categorical",
        "recodes": [{"map": {"1": "Male", "2": "Female"}}],
    },
    {
        "target": "HOUSEHOLD_INCOME",
        "sources": {"1999-2000": "INDHHINC", "*": "INDHHIN2"},
        "kind": "ordinal",
        "drop_codes": [77, 99],
        "recodes": [{"cycles": ["2007-2008"], "map": {"5": 5, "15": 11}}],
    },
    {
        "target": "EDUCATION",
        "sources": {"*": "DMDEDUC2"},
        "drop_codes": [7, 9],
        "eligibility": {"variable": "AGE", "min": 20},
    },
]


@pytest.fixture
def raw():
    return {
        "2007-2008": ColumnTable.from_columns(
            {
                "SEQN": [10, 11],
                "RIDAGEYR": [30, 50],
                "RIAGENDR": [2, 1],
                "INDHHIN2": [5, 15],
                "DMDEDUC2": [4, 5],
            },
        ),
        "1999-2000": ColumnTable.from_columns(
            {
                "SEQN": [1, 2, 3],
                "RIDAGEYR": [15, 40, 70],
                "RIAGENDR": [1, 2, 1],
                "INDHHINC": [3, 77, 9],
                "DMDEDUC2": [Missing("."), 3, 9],
            },
        ),
    }


@pytest.fixture
def rules():
    return [HarmonizationRule.from_dict(rule) for rule in RULES]


def nan_list(values):
    return [None if isinstance(val, float) and math.isnan(val) else val for val in values]


def test_apply_rules(raw, rules):
    view = apply_rules(raw, rules)

    assert view.keys.tolist() == [1.0, 2.0, 3.0, 10.0, 11.0]
    assert view.provenance.tolist() == ["1999-2000"] * 3 + ["2007-2008"] * 2
    assert view.column("AGE").tolist() == [15.0, 40.0, 70.0, 30.0, 50.0]
    assert view.column("GENDER").tolist() == ["Male", "Female", "Male", "Female", "Male"]
    assert nan_list(view.column("HOUSEHOLD_INCOME")) == [3.0, None, 9.0, 5.0, 11.0]
    assert nan_list(view.column("EDUCATION")) == [None, 3.0, None, 4.0, 5.0]


def test_unmapped_values_set_missing(raw, rules, caplog):
    raw["2007-2008"] = raw["2007-2008"].with_columns({"INDHHIN2": np.array([5.0, 8.0])})
    with caplog.at_level(logging.WARNING):
        view = apply_rules(raw, rules)
    assert nan_list(view.column("HOUSEHOLD_INCOME"))[3:] == [5.0, None]
    assert "unmapped" in caplog.text


def test_unmapped_values_strict(raw, rules):
    raw["2007-2008"] = raw["2007-2008"].with_columns({"INDHHIN2": np.array([5.0, 8.0])})
    with pytest.raises(RecodeDomainError, match="HOUSEHOLD_INCOME"):
        apply_rules(raw, rules, strict=True)


def test_rule_conflict(raw, rules):
    with pytest.raises(RuleConflict, match="AGE"):
        apply_rules(raw, [*rules, rules[0]])


def test_eligibility_on_unknown_variable(raw):
    rule = HarmonizationRule.from_dict(
        {"target": "X", "sources": {"*": "RIDAGEYR"}, "eligibility": {"variable": "NOPE"}},
    )
    with pytest.raises(UnknownColumn):
        apply_rules(raw, [rule])


def test_duplicate_map_key():
    with pytest.raises(ConfigError, match="twice"):
        HarmonizationRule.from_dict(
            {"target": "X", "sources": {"*": "A"}, "recodes": [{"map": [[1, 2], [1.0, 3]]}]},
        )


def test_fill_for_absent_source(raw):
    rule = HarmonizationRule.from_dict(
        {"target": "PREGNANT", "sources": {"*": "RIDEXPRG"}, "fill": 0},
    )
    assert apply_rules(raw, [rule]).column("PREGNANT").tolist() == [0.0] * 5


def test_combine_mean():
    raw = {
        "2013-2014": ColumnTable.from_columns(
            {"SEQN": [1, 2, 3], "S1": [120, 130, Missing()], "S2": [Missing(), 140, Missing()]},
        ),
    }
    rule = HarmonizationRule.from_dict(
        {"target": "BP", "sources": {"*": ["S1", "S2"]}, "combine": "mean"},
    )
    assert nan_list(apply_rules(raw, [rule]).column("BP")) == [120.0, 135.0, None]


def test_first_source_wins():
    raw = {
        "2013-2014": ColumnTable.from_columns(
            {"SEQN": [1, 2], "A": [Missing(), 2], "B": [7, 8]},
        ),
    }
    rule = HarmonizationRule.from_dict({"target": "X", "sources": {"*": ["A", "B"]}})
    assert apply_rules(raw, [rule]).column("X").tolist() == [7.0, 2.0]


def test_shipped_rules():
    views = load_rules()
    assert set(views) == {"demographics", "body_measures", "laboratory", "smoking", "outcomes"}
    demo = views["demographics"]
    assert demo.components == ("demographics",)
    assert demo.kinds["GENDER"] == "categorical"
    assert demo.kinds["AGE"] == "continuous"

    income = next(rule for rule in demo.rules if rule.target == "HOUSEHOLD_INCOME")
    assert income.recode_for("2013-2014").mapping[15.0] == 11.0
    assert 77.0 in income.drop_codes

    outcomes = {rule.target for rule in views["outcomes"].rules}
    assert {"DIAGNOSED", "FPG", "FAMILY_HISTORY", "SMOKER"} <= outcomes


def test_load_raw_cycles_merges_components(tmp_path):
    demo = write_xport(tmp_path / "DEMO_H.XPT", {"SEQN": [1.0, 2.0], "RIDAGEYR": [30.0, 40.0]})
    bmx = write_xport(tmp_path / "BMX_H.XPT", {"SEQN": [2.0, 3.0], "BMXBMI": [22.0, 25.0]})
    cycle = CycleId(2013)
    files = [
        (ComponentRef("DEMO", cycle, "demographics", "demographics"), demo),
        (ComponentRef("BMX", cycle, "examination", "body_measures"), bmx),
    ]

    raw = load_raw_cycles(files, ["demographics", "body_measures"])
    table = raw["2013-2014"]
    assert sorted(table.keys.tolist()) == [1.0, 2.0, 3.0]
    assert set(table.columns) == {"SEQN", "RIDAGEYR", "BMXBMI"}

    assert load_raw_cycles(files, ["demographics"])["2013-2014"].columns == ["SEQN", "RIDAGEYR"]


def test_build_views_from_xport(tmp_path):
    demo = write_xport(
        tmp_path / "DEMO_H.XPT", {"SEQN": [1.0, 2.0, 3.0], "RIAGENDR": [1.0, 2.0, 2.0]}
    )
    files = [(ComponentRef("DEMO", CycleId(2013), "demographics", "demographics"), demo)]
    rules = {
        "people": ViewRules(("demographics",), (HarmonizationRule.from_dict(RULES[1]),)),
    }
    views = build_views(rules, files)
    assert views["people"].column("GENDER").tolist() == ["Male", "Female", "Female"]
    assert views["people"].provenance.tolist() == ["2013-2014"] * 3


def test_join_views():
    left = ColumnTable.from_columns({"SEQN": [1, 2, 3], "A": [1, Missing(".B"), 3]})
    right = ColumnTable.from_columns({"SEQN": [3, 1, 5], "A": [30, 10, 50], "B": [0, 1, 2]})
    joined = join_views(left, right)

    assert joined.keys.tolist() == [1.0, 3.0]
    assert joined.columns == ["SEQN", "A", "A_right", "B"]
    assert joined.column("A_right").tolist() == [10.0, 30.0]
    assert joined.column("B").tolist() == [1.0, 0.0]


def test_join_keeps_codes():
    left = ColumnTable.from_columns({"SEQN": [1, 2], "A": [1, Missing(".B")]})
    right = ColumnTable.from_columns({"SEQN": [2, 1], "B": [Missing(".C"), 4]})
    joined = join_views(left, right)
    assert joined.cells("A") == [1.0, Missing(".B")]
    assert joined.cells("B") == [4.0, Missing(".C")]


def test_join_rejects_duplicate_keys():
    left = ColumnTable.from_columns({"SEQN": [1, 2], "A": [1, 2]})
    right = ColumnTable.from_columns({"SEQN": [1, 2], "B": [1, 2]})
    # Corrupt the frame behind the validated constructor.
    object.__setattr__(right, "frame", right.frame.assign(SEQN=[1.0, 1.0]))
    with pytest.raises(DuplicateKey):
        join_views(left, right)


def test_complete_cases():
    table = ColumnTable.from_columns(
        {"SEQN": [1, 2, 3, 4], "A": [1, Missing(), 3, 4], "B": [1, 2, Missing(), 4]},
    )
    result = complete_cases(table, ["A", "B"])
    assert result.table.keys.tolist() == [1.0, 4.0]
    assert (result.retained, result.dropped) == (2, 2)

    assert complete_cases(table, ["A"]).retained == 3
    assert complete_cases(table, []).retained == 4
    with pytest.raises(UnknownColumn):
        complete_cases(table, ["C"])


def test_summarize():
    table = ColumnTable.from_columns(
        {
            "SEQN": [1, 2, 3, 4, 5],
            "AGE": [30, 40, 50, 60, 10],
            "X": [1, 2, 3, 4, Missing()],
            "G": ["a", "b", "a", "b", "a"],
        },
    )
    stats = summarize(table)
    assert set(stats.columns) == {"AGE", "X"}
    assert stats.rows == 5

    x = stats["X"]
    assert x.count == 4
    assert x.mean == 2.5
    assert x.p25 == 1.75
    assert x.p50 == 2.5
    assert x.p75 == 3.25
    assert x.std == pytest.approx(np.sqrt(5 / 3))
    assert (x.min, x.max) == (1.0, 4.0)

    adults = summarize(table, adult_only=True)
    assert adults.rows == 4
    assert adults["AGE"].min == 30.0

    frame = stats.to_frame()
    assert frame.index.tolist() == ["AGE", "X"]
    assert "50%" in frame.columns


def test_summarize_degenerate_columns():
    table = ColumnTable.from_columns({"X": [5], "Y": [Missing()]}, key=None)
    stats = summarize(table)
    assert stats["X"].count == 1
    assert math.isnan(stats["X"].std)
    assert stats["X"].undefined == ("std",)
    assert stats["Y"].count == 0
    assert stats["Y"].undefined == ("all",)


def test_histogram():
    table = ColumnTable.from_columns(
        {"AGE": [1, 2, 11, 12, 20, Missing()], "G": [1, 2, 1, 1, 2, 1]}, key=None
    )
    hist = histogram(table, "AGE", 10, group_by="G")
    assert hist.edges.tolist() == [0.0, 10.0, 20.0, 30.0]
    assert hist.counts.tolist() == [2, 2, 1]
    assert hist.groups["1"].tolist() == [1, 2, 0]
    assert hist.groups["2"].tolist() == [1, 0, 1]
    assert sum(hist.counts) == 5

    frame = hist.to_frame()
    assert frame.columns.tolist() == ["bin_start", "bin_end", "count", "count_1", "count_2"]


def test_histogram_origin_and_empty():
    table = ColumnTable.from_columns({"X": [-3, 2.5, Missing()]}, key=None)
    hist = histogram(table, "X", 5, origin=0.5)
    assert hist.edges.tolist() == [-4.5, 0.5, 5.5]
    assert hist.counts.tolist() == [1, 1]

    empty = ColumnTable.from_columns({"X": [Missing()]}, key=None)
    assert len(histogram(empty, "X", 1).counts) == 0


@pytest.mark.parametrize("width", [0, -1.0])
def test_histogram_bad_width(width):
    table = ColumnTable.from_columns({"X": [1.0]}, key=None)
    with pytest.raises(NonPositiveBinWidth):
        histogram(table, "X", width)


@pytest.fixture
def mixed():
    return ColumnTable.from_columns(
        {
            "SEQN": [1, 2, 3, 4],
            "AGE": [20, 30, 40, 50],
            "RACE": ["White", "Black", "Asian", Missing()],
        },
    )


def test_design_matrix_onehot(mixed):
    design = to_design_matrix(mixed, ["AGE", "RACE"], {"RACE": "categorical"})
    assert design.names == ["AGE", "RACE=Black", "RACE=White"]
    assert design.encoding == {"RACE": ["Asian", "Black", "White"]}
    np.testing.assert_array_equal(design.values[:3], [[20, 0, 1], [30, 1, 0], [40, 0, 0]])
    assert np.isnan(design.values[3, 1:]).all()
    assert design.keys.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_design_matrix_codes(mixed):
    design = to_design_matrix(mixed, ["RACE", "AGE"], {"RACE": "categorical"}, categorical="codes")
    assert design.names == ["RACE", "AGE"]
    assert design.values[:3, 0].tolist() == [2.0, 1.0, 0.0]
    assert np.isnan(design.values[3, 0])


def test_design_matrix_reuses_encoding(mixed):
    encoding = {"RACE": ["Black", "Other"]}
    onehot = to_design_matrix(mixed, ["RACE"], {"RACE": "categorical"}, encoding)
    assert onehot.names == ["RACE=Other"]
    assert onehot.values[:3, 0].tolist() == [0.0, 0.0, 0.0]

    codes = to_design_matrix(
        mixed, ["RACE"], {"RACE": "categorical"}, encoding, categorical="codes"
    )
    assert np.isnan(codes.values[0, 0])
    assert codes.values[1, 0] == 0.0


def test_view_round_trip(tmp_path):
    table = ColumnTable.from_columns(
        {
            "SEQN": [1, 2, 3],
            "BMI": [20.5, Missing(".A"), Missing()],
            "GENDER": ["Male", Missing(), "Female"],
        },
        provenance=["1999-2000", "2001-2002", "2001-2002"],
    )
    path = write_view(table, tmp_path / "views" / "body.csv", {"GENDER": "categorical"})
    assert path.with_suffix(".json").exists()

    back, kinds = read_view(path)
    assert back.equals(table)
    assert back.key == "SEQN"
    assert back.provenance.tolist() == table.provenance.tolist()
    assert kinds == {"SEQN": "continuous", "BMI": "continuous", "GENDER": "categorical"}
