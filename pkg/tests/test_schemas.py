"""Tests for the file schemas."""

from __future__ import annotations

import pytest
from schema import Schema

from nhanes_multiview.dumpers import load_file
from nhanes_multiview.exceptions import ConfigError
from nhanes_multiview.harmonize import DATA_FOLDER, DEFAULT_RULES
from nhanes_multiview.ingest import DEFAULT_MANIFEST
from nhanes_multiview.schemas import SCHEMAS, get_schema, validate
from nhanes_multiview.schemas.config import DEFAULT_GRID, DEFAULT_VARIANTS, run_schema


def test_get_schema():
    assert get_schema("default") is run_schema
    assert get_schema(run_schema) is run_schema
    assert all(isinstance(schema, Schema) for schema in SCHEMAS.values())
    with pytest.raises(ConfigError, match="Unknown schema"):
        get_schema("nope")
    with pytest.raises(NotImplementedError):
        get_schema(3)


@pytest.mark.parametrize(
    ("path", "name"),
    [
        (DATA_FOLDER / "example_config.json", "run"),
        (DEFAULT_RULES, "rules"),
        (DEFAULT_MANIFEST, "manifest"),
    ],
)
def test_shipped_files_validate(path, name):
    validate(load_file(path), name)


def test_run_defaults():
    conf = validate({}, "run")
    assert conf["seed"] == 0
    assert conf["output_dir"] == "out"
    assert conf["experiment"] == {}


def test_experiment_defaults():
    conf = validate({}, "experiment")
    assert conf["variants"] == DEFAULT_VARIANTS
    assert conf["grid"] == DEFAULT_GRID
    assert conf["folds"] == 5
    assert conf["split_fraction"] == 0.7


@pytest.mark.parametrize(
    "data",
    [
        {"scheme": "III"},
        {"split_fraction": 1.0},
        {"ridge": -0.1},
        {"grid": {"kernels": ["poly"]}},
        {"grid": {"C": [0]}},
        {"variants": ["cca_dl(15)"]},
        {"n_jobs": 0},
    ],
)
def test_experiment_rejects(data):
    with pytest.raises(ConfigError, match="experiment"):
        validate(data, "experiment")


def test_run_rejects_bad_cycle():
    with pytest.raises(ConfigError):
        validate({"cycles": ["2013"]}, "run")


def test_manifest_rejects_long_stem():
    component = {"name": "x", "category": "laboratory", "stems": {"2013-2014": "TOOLONGSTEM"}}
    with pytest.raises(ConfigError):
        validate({"components": [component]}, "manifest")


def test_rule_defaults():
    view = {"components": ["c"], "rules": [{"target": "T", "sources": {"*": "S"}}]}
    rule = validate({"views": {"v": view}}, "rules")["views"]["v"]["rules"][0]
    assert rule["kind"] == "continuous"
    assert rule["combine"] == "first"
    assert rule["recodes"] == []
    assert rule["drop_codes"] == []


def test_rule_rejects_unknown_kind():
    rule = {"target": "T", "sources": {"*": "S"}, "kind": "nominal"}
    with pytest.raises(ConfigError):
        validate({"views": {"v": {"components": [], "rules": [rule]}}}, "rules")
