"""Loaders and dumpers for configuration, model and report files."""

from __future__ import annotations

from collections.abc import Callable
from contextlib import suppress
import json
from pathlib import Path
from typing import Any, Literal, NamedTuple, TextIO

import numpy as np

_YAML_TYPE = None

with suppress(ImportError):
    import yaml

    _YAML_TYPE = "pyyaml"

with suppress(ImportError):
    from ruamel import yaml as ruamel

    _YAML_TYPE = "ruamel"

#: Dumping function protocol.
Dumper = Callable[[Any, TextIO], None]
#: Loading function protocol.
Loader = Callable[[TextIO], Any]


class Format(NamedTuple):
    """Pair of operations for a given file format."""

    #: Dumper for format.
    dumper: Dumper
    #: Loader for format.
    loader: Loader


def to_builtin(data: Any) -> Any:
    """
    Convert numpy containers and scalars into JSON/YAML-safe builtins.

    Parameters
    ----------
    data : Any
        Possibly nested data containing numpy values.

    Returns
    -------
    Any
        Equivalent structure of builtin types.

    Examples
    --------
    >>> to_builtin({"a": np.arange(2)})
    {'a': [0, 1]}
    """
    match data:
        case np.ndarray():
            return data.tolist()
        case np.generic():
            return data.item()
        case dict():
            return {str(key): to_builtin(val) for key, val in data.items()}
        case list() | tuple():
            return [to_builtin(val) for val in data]
        case _:
            return data


def _json_dumper(data: Any, file: TextIO):
    """
    JSON format dumper.

    Keys are sorted so identical inputs give byte-identical files.

    Parameters
    ----------
    data : Any
        Data to dump.
    file : TextIO
        File to dump to.
    """
    json.dump(to_builtin(data), file, indent=2, sort_keys=True)
    file.write("\n")


def _ruamel_dumper(data: Any, file: TextIO):
    """
    YAML (ruamel.yaml) format dumper.

    Parameters
    ----------
    data : Any
        Data to dump.
    file : TextIO
        File to dump to.
    """
    yaml_eng = ruamel.YAML(typ="safe")
    yaml_eng.dump(to_builtin(data), file)


def _pyyaml_dumper(data: Any, file: TextIO):
    """
    YAML (pyyaml) format dumper.

    Parameters
    ----------
    data : Any
        Data to dump.
    file : TextIO
        File to dump to.
    """
    yaml.safe_dump(to_builtin(data), file, sort_keys=True)


def _ruamel_loader(file: TextIO) -> Any:
    yaml_eng = ruamel.YAML(typ="safe")
    return yaml_eng.load(file)


#: Currently supported formats.
SUPPORTED_FORMATS: dict[str, Format] = {
    "json": Format(_json_dumper, json.load),
    "ruamel": Format(_ruamel_dumper, _ruamel_loader),
    "pyyaml": Format(_pyyaml_dumper, lambda file: yaml.safe_load(file)),
}
#: Valid formats.
Formats = Literal["json", "yaml", "ruamel", "pyyaml"]


def get_format(fmt: Formats) -> Format:
    """
    Resolve a format name to its loader/dumper pair.

    Parameters
    ----------
    fmt : Formats
        Format to handle; ``"yaml"`` picks whichever YAML engine is installed.

    Returns
    -------
    Format
        Loader and dumper.

    Raises
    ------
    ImportError
        No YAML engine installed and ``yaml`` requested.
    ValueError
        Invalid `fmt` provided.
    """
    if fmt == "yaml":
        if _YAML_TYPE is None:
            raise ImportError(
                "Couldn't find valid yaml engine (ruamel.yaml / yaml), please install and try again.",
            )
        fmt = _YAML_TYPE

    if fmt not in SUPPORTED_FORMATS:
        raise ValueError(
            f"Cannot handle {fmt} format. Valid keys are: {', '.join(SUPPORTED_FORMATS.keys())}",
        )

    return SUPPORTED_FORMATS[fmt]


def guess_format(path: Path) -> Formats:
    """
    Guess format from path suffix.

    Parameters
    ----------
    path : Path
        Path to guess format of.

    Returns
    -------
    Formats
        Expected format.

    Raises
    ------
    NotImplementedError
        Unknown suffix.

    Examples
    --------
    >>> from pathlib import Path
    >>> guess_format(Path("config.json"))
    'json'
    >>> guess_format(Path("config.yml"))
    'yaml'
    """
    match path.suffix.lower():
        case ".json":
            return "json"
        case ".yaml" | ".yml":
            return "yaml"
        case _:
            raise NotImplementedError(f"Cannot infer type of file {path.suffix!r}")


def load_file(path: Path | str, fmt: Formats | None = None) -> Any:
    """
    Load a JSON or YAML file.

    Parameters
    ----------
    path : Path | str
        File to load.
    fmt : Formats, optional
        Format override (default: determine from suffix).

    Returns
    -------
    Any
        Parsed data.
    """
    path = Path(path)
    fmt = fmt or guess_format(path)

    with path.open("r", encoding="utf8") as file:
        return get_format(fmt).loader(file)


def dump_file(data: Any, path: Path | str, fmt: Formats | None = None) -> Path:
    """
    Dump data to a JSON or YAML file, creating parent folders.

    Parameters
    ----------
    data : Any
        Data to dump.
    path : Path | str
        Destination.
    fmt : Formats, optional
        Format override (default: determine from suffix).

    Returns
    -------
    Path
        Written path.
    """
    path = Path(path)
    fmt = fmt or guess_format(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", encoding="utf8", newline="\n") as file:
        get_format(fmt).dumper(data, file)

    return path
