"""Tests for the keyed column table."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from nhanes_multiview.exceptions import DuplicateKey, UnknownColumn
from nhanes_multiview.table import MISSING_CODES, ColumnTable, Missing


@pytest.fixture
def table():
    return ColumnTable.from_columns(
        {
            "SEQN": [1, 2, 3],
            "BMI": [20.5, Missing(".A"), 31.0],
            "GENDER": ["Male", "Female", Missing()],
        },
        provenance=["1999-2000", "1999-2000", "2001-2002"],
    )


def test_missing_codes():
    assert len(MISSING_CODES) == 28
    assert MISSING_CODES[0] == "."
    assert MISSING_CODES[-1] == "._"
    assert str(Missing(".Z")) == ".Z"


def test_from_columns_types(table):
    assert table.columns == ["SEQN", "BMI", "GENDER"]
    assert table.frame["BMI"].dtype == np.float64
    assert table.frame["GENDER"].dtype == object
    assert table.keys.tolist() == [1.0, 2.0, 3.0]
    assert len(table) == 3


def test_cells_restore_missing_codes(table):
    assert table.cells("BMI") == [20.5, Missing(".A"), 31.0]
    assert table.cells("GENDER") == ["Male", "Female", None]
    assert table.is_missing("BMI").tolist() == [False, True, False]


def test_duplicate_key():
    with pytest.raises(DuplicateKey):
        ColumnTable.from_columns({"SEQN": [1, 1], "X": [0, 1]})


def test_absent_key():
    with pytest.raises(UnknownColumn):
        ColumnTable(pd.DataFrame({"X": [1.0]}))


def test_unkeyed_table():
    tab = ColumnTable.from_columns({"X": [1, 1]}, key=None)
    with pytest.raises(UnknownColumn):
        _ = tab.keys


def test_require(table):
    table.require(["BMI"])
    with pytest.raises(UnknownColumn, match="WAIST"):
        table.column("WAIST")


def test_take_keeps_codes_and_provenance(table):
    sub = table.take(np.array([False, True, True]))
    assert sub.keys.tolist() == [2.0, 3.0]
    assert sub.cells("BMI") == [Missing(".A"), 31.0]
    assert sub.provenance.tolist() == ["1999-2000", "2001-2002"]

    assert table.take([2, 0]).keys.tolist() == [3.0, 1.0]


def test_select_keeps_key(table):
    sub = table.select(["BMI"])
    assert sub.columns == ["SEQN", "BMI"]
    assert sub.cells("BMI") == [20.5, Missing(".A"), 31.0]


def test_with_columns_drops_replaced_codes(table):
    out = table.with_columns({"BMI": np.array([1.0, np.nan, 3.0]), "NEW": np.zeros(3)})
    assert out.cells("BMI") == [1.0, Missing("."), 3.0]
    assert out.columns == ["SEQN", "BMI", "GENDER", "NEW"]


def test_equals(table):
    same = ColumnTable.from_columns(
        {
            "SEQN": [1, 2, 3],
            "BMI": [20.5, Missing(".A"), 31.0],
            "GENDER": ["Male", "Female", Missing()],
        },
    )
    assert table.equals(same)
    other = ColumnTable.from_columns(
        {"SEQN": [1, 2, 3], "BMI": [20.5, Missing(".B"), 31.0], "GENDER": ["Male", "Female", None]},
    )
    assert not table.equals(other)
    assert not table.equals(table.select(["BMI"]))
