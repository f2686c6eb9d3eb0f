"""Module defining the validated file formats."""

from __future__ import annotations

from functools import singledispatch
from typing import Any

from schema import Schema as Schema
from schema import SchemaError

from nhanes_multiview.exceptions import ConfigError

from .config import experiment_schema, run_schema
from .manifest import manifest_schema
from .rules import rules_schema

SCHEMAS = {
    "run": run_schema,
    "experiment": experiment_schema,
    "rules": rules_schema,
    "manifest": manifest_schema,
    "default": run_schema,
}


@singledispatch
def get_schema(schema) -> Schema:
    """
    Get schema.

    Parameters
    ----------
    schema : Schema | str
        Schema to get.

    Returns
    -------
    Schema
        Desired schema.

    Raises
    ------
    NotImplementedError
        Passed an invalid type.

    Examples
    --------
    >>> get_schema(rules_schema) is rules_schema
    True
    >>> get_schema("default") is run_schema
    True
    """
    raise NotImplementedError(f"Cannot find schema with {type(schema).__name__}")


@get_schema.register
def _(schema: Schema) -> Schema:
    return schema


@get_schema.register
def _(schema: str) -> Schema:
    try:
        return SCHEMAS[schema]
    except KeyError as err:
        raise ConfigError(f"Unknown schema {schema!r}, valid: {', '.join(SCHEMAS)}") from err


def validate(data: Any, schema: Schema | str) -> Any:
    """
    Validate data against a schema.

    Parameters
    ----------
    data : Any
        Parsed file contents.
    schema : Schema | str
        Schema or its registry name.

    Returns
    -------
    Any
        Validated data with defaults filled.

    Raises
    ------
    ConfigError
        Validation failed.
    """
    try:
        return get_schema(schema).validate(data)
    except SchemaError as err:
        raise ConfigError(f"Invalid {getattr(schema, 'name', schema)} data: {err}") from err
