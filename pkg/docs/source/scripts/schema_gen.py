"""Generate markdown pages for the configuration file schemas."""

from __future__ import annotations

import argparse
from pathlib import Path
from shutil import rmtree
from textwrap import indent
from typing import TYPE_CHECKING

import jsonschema_markdown

from nhanes_multiview.schemas import SCHEMAS, Schema, get_schema

if TYPE_CHECKING:
    from collections.abc import Sequence

__version__ = "0.1"

INDEX_RST = """\
{header}
{underline}

This page documents the available schemas.

.. toctree::
   :maxdepth: 1
   :caption: Schemas:

{pages}
"""

TITLES = {
    "run": "Run configuration",
    "experiment": "Experiment section",
    "rules": "Harmonization rules",
    "manifest": "Component manifest",
}


def get_arg_parser() -> argparse.ArgumentParser:
    """Get parser for CLI.

    Returns
    -------
    argparse.ArgumentParser
        Arg parser.
    """
    parser = argparse.ArgumentParser(
        description="Render the file schemas as markdown pages.",
    )

    parser.add_argument("-V", "--version", action="version", version=f"%(prog)s v{__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Print progress.")
    parser.add_argument(
        "-F",
        "--force",
        action="store_true",
        help="Clear an existing output folder. (default: %(default)s)",
    )
    parser.add_argument(
        "schemas",
        nargs="*",
        choices=SCHEMAS.keys() | {"all"},
        help="Schemas to render or 'all'. (default: %(default)r)",
        default="all",
    )
    parser.add_argument(
        "--index",
        action=argparse.BooleanOptionalAction,
        help="Write index file with toctree to folder. (default: %(default)s)",
        default=True,
    )
    parser.add_argument(
        "-o",
        "--out-folder",
        help="Folder to write pages in. (default: %(default)r)",
        default="schemas",
        type=Path,
    )

    return parser


def selected_schemas(requested: Sequence[str]) -> dict[str, Schema]:
    """Pick the requested schemas, dropping registry aliases.

    Parameters
    ----------
    requested : Sequence[str]
        Registry keys or ``"all"``.

    Returns
    -------
    dict[str, Schema]
        First key naming each distinct schema, in registry order.

    Examples
    --------
    >>> list(selected_schemas(["all"]))
    ['run', 'experiment', 'rules', 'manifest']
    """
    chosen: dict[str, Schema] = {}
    for key, schema in SCHEMAS.items():
        if ("all" in requested or key in requested) and schema not in chosen.values():
            chosen[key] = schema
    return chosen


def render_schema(key: str) -> str:
    """Render one schema as markdown.

    Parameters
    ----------
    key : str
        Registry key.

    Returns
    -------
    str
        Markdown page.
    """
    schema = get_schema(key)
    return jsonschema_markdown.generate(
        schema.json_schema(key),
        title=TITLES.get(key, key),
        footer=False,
        hide_empty_columns=True,
    )


def prepare_folder(folder: Path, *, force: bool = False) -> None:
    """Make sure the output folder exists and is empty.

    Parameters
    ----------
    folder : Path
        Output folder.
    force : bool
        Allow clearing a folder holding files.

    Raises
    ------
    FileExistsError
        Folder holds files and `force` is not set.
    """
    if folder.exists() and any(folder.iterdir()):
        if not force:
            raise FileExistsError(f"{folder} is not empty, pass --force to clear it")
        if not folder.samefile(Path.cwd()):
            rmtree(folder)
    folder.mkdir(parents=True, exist_ok=True)


def main(args_in: Sequence[str] | None = None, /) -> None:
    """Render schemas to file.

    Parameters
    ----------
    args_in : Sequence[str], optional
        Pass CLI params directly.
    """
    args = get_arg_parser().parse_args(args_in)
    schemas = selected_schemas(args.schemas)

    prepare_folder(args.out_folder, force=args.force)

    for key in schemas:
        out_path = args.out_folder / f"{key}.md"
        if args.verbose:
            print(f"Rendering {key!r} to {out_path}...")
        out_path.write_text(render_schema(key), encoding="utf-8")

    if args.index:
        header = "Schemas"
        (args.out_folder / "index.rst").write_text(
            INDEX_RST.format(
                header=header,
                underline="=" * len(header),
                pages=indent("\n".join(schemas), " " * 3),
            ),
            encoding="utf-8",
        )


if __name__ == "__main__":
    main()
