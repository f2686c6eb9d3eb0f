"""Tests for file loading and dumping."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from nhanes_multiview.dumpers import dump_file, get_format, guess_format, load_file, to_builtin


def test_guess_format():
    assert guess_format(Path("a.JSON")) == "json"
    assert guess_format(Path("a.yml")) == "yaml"
    with pytest.raises(NotImplementedError):
        guess_format(Path("a.toml"))


def test_get_format_rejects_unknown():
    with pytest.raises(ValueError, match="Cannot handle"):
        get_format("xml")


def test_to_builtin():
    data = {"a": np.arange(2), "b": (np.float64(1.5), [np.int64(3)]), 4: None}
    assert to_builtin(data) == {"a": [0, 1], "b": [1.5, [3]], "4": None}


def test_json_dump_is_stable(tmp_path):
    data = {"b": np.array([1.0, 2.0]), "a": {"z": 1, "y": "text"}}
    first = dump_file(data, tmp_path / "x" / "data.json")
    again = dump_file({"a": {"y": "text", "z": 1}, "b": [1.0, 2.0]}, tmp_path / "again.json")
    assert first.read_bytes() == again.read_bytes()
    assert first.read_text().endswith("}\n")
    assert load_file(first) == {"a": {"y": "text", "z": 1}, "b": [1.0, 2.0]}


def test_format_override(tmp_path):
    path = dump_file({"a": 1}, tmp_path / "data.txt", fmt="json")
    assert load_file(path, fmt="json") == {"a": 1}


def test_yaml_round_trip(tmp_path):
    pytest.importorskip("yaml")
    path = dump_file({"seed": 3, "cycles": ["2013-2014"]}, tmp_path / "conf.yaml")
    assert load_file(path) == {"seed": 3, "cycles": ["2013-2014"]}
