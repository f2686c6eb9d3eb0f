"""Arguments, logging and configuration shared by the command-line tools."""

from __future__ import annotations

import argparse
from collections.abc import Callable
import json
import logging
from pathlib import Path
import sys
from typing import Any

from nhanes_multiview.dumpers import load_file
from nhanes_multiview.exceptions import NhanesMultiviewError
from nhanes_multiview.schemas import validate
from nhanes_multiview.synthetic import synthetic_study
from nhanes_multiview.task import StudyData

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def add_run_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    """
    Add the flags every tool accepts.

    Parameters
    ----------
    parser : ArgumentParser
        Parser to configure.

    Returns
    -------
    ArgumentParser
        Configured parser.
    """
    parser.add_argument(
        "-c",
        "--config",
        type=Path,
        help="Run configuration file, JSON or YAML (default: built-in defaults).",
        default=None,
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="Seed overriding the configuration.",
        default=None,
    )
    parser.add_argument(
        "-o",
        "--out",
        type=Path,
        help="Output folder overriding the configuration.",
        default=None,
    )
    parser.add_argument(
        "--json-errors",
        action="store_true",
        help="Report errors as JSON on stderr.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="More output (-v info, -vv debug).",
    )
    return parser


def add_study_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    """
    Add the flags choosing the harmonized views to work on.

    Parameters
    ----------
    parser : ArgumentParser
        Parser to configure.

    Returns
    -------
    ArgumentParser
        Configured parser.
    """
    source = parser.add_mutually_exclusive_group()
    source.add_argument(
        "--views",
        type=Path,
        metavar="DIR",
        help="Folder of harmonized views (default: configured views_dir or OUT/views).",
        default=None,
    )
    source.add_argument(
        "--synthetic",
        type=int,
        metavar="N",
        help="Run on a generated study of N respondents instead.",
        default=None,
    )
    return parser


def configure_logging(verbosity: int) -> None:
    """
    Configure the root logger once for a command-line run.

    Parameters
    ----------
    verbosity : int
        0 for warnings, 1 for info, 2 or more for debug.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def load_run_config(args: argparse.Namespace) -> dict[str, Any]:
    """
    Validated run configuration with command-line overrides applied.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.

    Returns
    -------
    dict[str, Any]
        Run configuration.

    Raises
    ------
    ConfigError
        Invalid configuration file.
    """
    data = load_file(args.config) if args.config is not None else {}
    conf = validate(data or {}, "run")
    if args.seed is not None:
        conf["seed"] = args.seed
    if args.out is not None:
        conf["output_dir"] = str(args.out)
    return conf


def output_dir(conf: dict[str, Any]) -> Path:
    """
    Create and return the configured output folder.

    Parameters
    ----------
    conf : dict[str, Any]
        Run configuration.

    Returns
    -------
    Path
        Output folder.
    """
    out = Path(conf["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_study(args: argparse.Namespace, conf: dict[str, Any]) -> StudyData:
    """
    Views named by the command line: generated, a given folder, or the configured one.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.

    Returns
    -------
    StudyData
        Views.
    """
    if getattr(args, "synthetic", None):
        logger.info("Generating a synthetic study of %d respondents", args.synthetic)
        return synthetic_study(args.synthetic, conf["seed"])
    views = getattr(args, "views", None) or conf["views_dir"] or Path(conf["output_dir"]) / "views"
    return StudyData.from_dir(views)


def run_command(func: Callable[[argparse.Namespace, dict], Any], args: argparse.Namespace) -> int:
    """
    Run a command, turning failures into a nonzero exit status.

    Parameters
    ----------
    func : Callable[[Namespace, dict], Any]
        Command taking the arguments and the run configuration.
    args : Namespace
        Parsed arguments.

    Returns
    -------
    int
        Exit status.
    """
    configure_logging(args.verbose)
    try:
        func(args, load_run_config(args))
    except (NhanesMultiviewError, OSError, ValueError, NotImplementedError, ImportError) as err:
        if args.json_errors:
            print(
                json.dumps({"error": type(err).__name__, "message": str(err)}), file=sys.stderr
            )
        else:
            print(f"Error: {err}", file=sys.stderr)
        logger.debug("Command failed", exc_info=err)
        return 1
    return 0
