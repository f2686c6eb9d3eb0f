#!/usr/bin/env python
"""Script running the diabetes classification experiment."""

from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
from typing import Any

from nhanes_multiview.cli.common import (
    add_run_arguments,
    add_study_arguments,
    load_study,
    output_dir,
    run_command,
)
from nhanes_multiview.evaluation import reports_frame
from nhanes_multiview.task import ExperimentConfig, run_experiment

logger = logging.getLogger(__name__)


def experiment_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Run every configured variant and write the result tables and curves.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    seed = args.seed if args.seed is not None else conf["experiment"].get("seed", conf["seed"])
    overrides = {"seed": seed, "scheme": args.scheme, "n_jobs": args.jobs}
    if args.variants:
        overrides["variants"] = args.variants
    config = ExperimentConfig.from_dict(conf["experiment"], **overrides)

    study = load_study(args, conf)
    out = output_dir(conf)
    reports = run_experiment(study, config, out_dir=out)

    frame = reports_frame(reports)
    print(frame[["model", "data_size", "sensitivity", "specificity", "auc"]].to_string(index=False))
    failed = [report.model_name for report in reports if report.failure]
    if failed:
        logger.warning("Variants failed: %s", ", ".join(failed))


def get_arg_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    """
    Return an argument parser for the experiment, or configure a subparser if passed.

    Parameters
    ----------
    parser : ArgumentParser, optional
        Parser (or SubParser) to configure.

    Returns
    -------
    ArgumentParser
        Configured parser for the experiment.
    """
    if parser is None:
        parser = argparse.ArgumentParser(
            description="Compare diabetes classifiers built on NHANES views.",
        )
        add_run_arguments(parser)

    add_study_arguments(parser)
    parser.add_argument(
        "--scheme",
        choices=("I", "II"),
        help="Labelling scheme overriding the configuration.",
        default=None,
    )
    parser.add_argument(
        "--variants",
        nargs="+",
        metavar="VARIANT",
        help="Model variants overriding the configuration, e.g. REG 'CCA_DL(15)'.",
        default=None,
    )
    parser.add_argument(
        "-j",
        "--jobs",
        type=int,
        help="Grid-search worker processes.",
        default=None,
    )
    return parser


def main(args: argparse.Namespace) -> int:
    """
    Run the experiment from parsed arguments.

    Parameters
    ----------
    args : Namespace
        Arguments to run.

    Returns
    -------
    int
        Exit status.
    """
    return run_command(experiment_command, args)


def cli(argv: Sequence[str] | None = None) -> int:
    """
    Run the experiment from the command line.

    Parameters
    ----------
    argv : Sequence[str], optional
        Arguments (default: ``sys.argv``).

    Returns
    -------
    int
        Exit status.
    """
    parser = get_arg_parser()
    return main(parser.parse_args(argv))


if __name__ == "__main__":
    raise SystemExit(cli())
