"""CLI for the nhanes-multiview project."""

from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
from pathlib import Path
from typing import Any

import pandas as pd

from nhanes_multiview import __version__
from nhanes_multiview.cca import DEFAULT_RIDGE, cca_loadings
from nhanes_multiview.cli.common import (
    add_run_arguments,
    add_study_arguments,
    load_study,
    output_dir,
    run_command,
)
from nhanes_multiview.cli.run_experiment import experiment_command
from nhanes_multiview.cli.run_experiment import get_arg_parser as get_experiment_parser
from nhanes_multiview.dumpers import dump_file, load_file
from nhanes_multiview.exceptions import MissingView
from nhanes_multiview.harmonize import (
    DATA_FOLDER,
    DEFAULT_RULES,
    build_views,
    complete_cases,
    histogram,
    load_rules,
    summarize,
    to_design_matrix,
)
from nhanes_multiview.ingest import (
    ALL_CYCLES,
    CATEGORIES,
    CycleId,
    DEFAULT_MANIFEST,
    build_component_url,
    cache_path,
    download_manifest,
    load_manifest,
    resolve_cache_root,
)
from nhanes_multiview.pca import loadings_frame, pca_fit, pca_loadings
from nhanes_multiview.plotting import plot_histogram
from nhanes_multiview.task import CCA_PAIRS, DEMOGRAPHICS, StudyData, fit_view_cca
from nhanes_multiview.xport import dump_csv, read_xport

logger = logging.getLogger(__name__)

EXAMPLE_CONFIG = DATA_FOLDER / "example_config.json"

CSV_OPTIONS = {"index": False, "float_format": "%.6f", "lineterminator": "\n"}


def _cycles(args: argparse.Namespace, conf: dict[str, Any]) -> list[str]:
    return args.cycles or conf["cycles"] or [cycle.label for cycle in ALL_CYCLES]


def _views_dir(args: argparse.Namespace, conf: dict[str, Any]) -> Path:
    return Path(args.views or conf["views_dir"] or Path(conf["output_dir"]) / "views")


def _member(value: str) -> int | str:
    return int(value) if value.isdigit() else value


def download_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Fetch the manifest's component files into the cache.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    manifest = load_manifest(args.manifest or conf["manifest"] or DEFAULT_MANIFEST)
    cache_root = resolve_cache_root(conf["cache_dir"])
    results = download_manifest(
        manifest,
        _cycles(args, conf),
        cache_root,
        categories=args.categories or CATEGORIES,
        progress=not args.no_progress,
    )

    summary = {
        category: {
            "files": [str(path) for _, path in fetched.files],
            "absent": [f"{ref.cycle.label}/{ref.file_name}" for ref in fetched.absent],
        }
        for category, fetched in results.items()
    }
    dump_file(summary, output_dir(conf) / "download.json")
    for category, fetched in results.items():
        print(f"{category}: {len(fetched.files)} file(s), {len(fetched.absent)} absent")


def clean_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Harmonize cached component files into views.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.

    Raises
    ------
    MissingView
        No component file is cached.
    """
    manifest = load_manifest(args.manifest or conf["manifest"] or DEFAULT_MANIFEST)
    rules = load_rules(args.rules or conf["rule_file"] or DEFAULT_RULES)
    cache_root = resolve_cache_root(conf["cache_dir"])

    files = []
    for spec in manifest:
        for ref in spec.refs([CycleId.parse(cycle) for cycle in _cycles(args, conf)]):
            path = cache_path(build_component_url(ref), cache_root)
            if path.exists():
                files.append((ref, path))
            else:
                logger.info("%s for %s not cached", ref.file_name, ref.cycle)
    if not files:
        raise MissingView(f"No component files cached under {cache_root}; run download first")

    views = build_views(rules, files, strict=args.strict)
    study = StudyData(views, {name: view.kinds for name, view in rules.items()})
    for path in study.write(_views_dir(args, conf)):
        print(path)


def eda_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Write a view summary and optionally a histogram of one column.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    study = load_study(args, conf)
    out = output_dir(conf)
    table = study.view(args.view)

    summary = summarize(table, adult_only=args.adult_only)
    summary.to_frame().reset_index().to_csv(out / f"summary_{args.view}.csv", **CSV_OPTIONS)
    print(f"{args.view}: {summary.rows} row(s)")

    if args.column is None:
        return
    if args.adult_only:
        table = table.take((table.column("AGE") > 20).to_numpy())  # noqa: PLR2004
    hist = histogram(table, args.column, args.bin_width, group_by=args.group_by)
    hist.to_frame().to_csv(out / f"hist_{args.column}.csv", **CSV_OPTIONS)
    plot_histogram(
        hist, out / f"hist_{args.column}.svg", title=args.view, xlabel=args.column
    )


def pca_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Fit PCA on a view and write the model and its loadings.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    study = load_study(args, conf)
    out = output_dir(conf)
    columns = study.variables(args.view)
    table = complete_cases(study.view(args.view), columns).table
    design = to_design_matrix(table, columns, study.view_kinds(args.view))

    model = pca_fit(design.values, args.k, standardize=not args.no_standardize, names=design.names)
    model.save(out / f"pca_{args.view}.json")
    loadings_frame(pca_loadings(model)).to_csv(
        out / f"pca_{args.view}_loadings.csv", **CSV_OPTIONS
    )
    for i, ratio in enumerate(model.explained_variance_ratio, start=1):
        print(f"PC{i}: {ratio:.4f}")


def cca_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Fit CCA on a view pair and write the model and its loadings.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    study = load_study(args, conf)
    out = output_dir(conf)
    ridge = args.ridge if args.ridge is not None else conf["experiment"].get("ridge", DEFAULT_RIDGE)

    model = fit_view_cca(study, args.pair, args.k, ridge)
    stem = f"cca_{args.pair.lower()}"
    model.save(out / f"{stem}.json")

    loadings = cca_loadings(model)
    x_view, y_view = CCA_PAIRS[args.pair]
    frame = pd.concat(
        [
            loadings_frame([pair[0] for pair in loadings], prefix="CC").assign(view=x_view),
            loadings_frame([pair[1] for pair in loadings], prefix="CC").assign(view=y_view),
        ],
        ignore_index=True,
    )
    frame.to_csv(out / f"{stem}_loadings.csv", **CSV_OPTIONS)

    for i, corr in enumerate(model.correlations, start=1):
        print(f"CC{i}: {corr:.4f}")
    print(f"Retained correlation: {model.retained_fraction:.4f}")


def xport_command(args: argparse.Namespace, conf: dict[str, Any]) -> None:
    """
    Convert one member of a SAS transport file to CSV.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    conf : dict[str, Any]
        Run configuration.
    """
    try:
        table = read_xport(args.file, args.member)
    except (KeyError, IndexError) as err:
        raise ValueError(f"No member {args.member!r} in {args.file}") from err
    out = args.to or output_dir(conf) / f"{args.file.stem}.csv"
    dump_csv(table, out, keep_missing_codes=args.keep_missing_codes)
    logger.info("Wrote %d rows of %s to %s", len(table.frame), args.file, out)
    print(out)


def template_command(args: argparse.Namespace, _conf: dict[str, Any]) -> None:
    """
    Dump the example run configuration.

    Parameters
    ----------
    args : Namespace
        Parsed arguments.
    _conf : dict[str, Any]
        Run configuration (unused).
    """
    dump_file(load_file(EXAMPLE_CONFIG), args.file, args.format)


def get_arg_parser() -> argparse.ArgumentParser:
    """
    Build argument parser for nhanes-multiview.

    Returns
    -------
    ArgumentParser
        Configured parser for CLI.
    """
    arg_parser = argparse.ArgumentParser(
        prog="nhanes_multiview",
        description="Download, harmonize and model NHANES views.",
    )
    arg_parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=f"%(prog)s v{__version__}",
    )
    add_run_arguments(arg_parser)
    arg_parser.set_defaults(command=None)
    subparser = arg_parser.add_subparsers()

    # Download
    sp = subparser.add_parser(
        "download",
        help="Fetch NHANES component files.",
        description="Fetch the manifest's component files into the local cache.",
    )
    sp.add_argument("--cycles", nargs="+", metavar="CYCLE", help="Cycles, e.g. 2013-2014.")
    sp.add_argument(
        "--categories", nargs="+", choices=CATEGORIES, help="Categories (default: all)."
    )
    sp.add_argument("--manifest", type=Path, help="Component manifest.", default=None)
    sp.add_argument("--no-progress", action="store_true", help="Hide the progress bar.")
    sp.set_defaults(command=download_command)

    # Clean
    sp = subparser.add_parser(
        "clean",
        help="Harmonize cached files into views.",
        description="Apply the rule file to cached component files and write the views.",
    )
    sp.add_argument("--cycles", nargs="+", metavar="CYCLE", help="Cycles, e.g. 2013-2014.")
    sp.add_argument("--manifest", type=Path, help="Component manifest.", default=None)
    sp.add_argument("--rules", type=Path, help="Harmonization rule file.", default=None)
    sp.add_argument("--views", type=Path, metavar="DIR", help="Output view folder.", default=None)
    sp.add_argument(
        "--strict", action="store_true", help="Fail on values without a recode mapping."
    )
    sp.set_defaults(command=clean_command)

    # EDA
    sp = subparser.add_parser(
        "eda",
        help="Summarize a view.",
        description="Write descriptive statistics of a view and a histogram of one column.",
    )
    add_study_arguments(sp)
    sp.add_argument("--view", default=DEMOGRAPHICS, help="View to summarize.")
    sp.add_argument("--column", default=None, help="Column to histogram, e.g. AGE.")
    sp.add_argument("--bin-width", type=float, default=5.0, help="Histogram bin width.")
    sp.add_argument("--group-by", default=None, help="Column splitting histogram counts.")
    sp.add_argument("--adult-only", action="store_true", help="Only respondents over 20.")
    sp.set_defaults(command=eda_command)

    # PCA
    sp = subparser.add_parser(
        "pca",
        help="Principal components of a view.",
        description="Fit PCA on one view and write the model and loadings.",
    )
    add_study_arguments(sp)
    sp.add_argument("--view", default=DEMOGRAPHICS, help="View to decompose.")
    sp.add_argument("-k", type=int, default=5, help="Components.")
    sp.add_argument(
        "--no-standardize", action="store_true", help="Centre only, without scaling."
    )
    sp.set_defaults(command=pca_command)

    # CCA
    sp = subparser.add_parser(
        "cca",
        help="Canonical correlations of a view pair.",
        description="Fit CCA on a view pair and write the model and loadings.",
    )
    add_study_arguments(sp)
    sp.add_argument(
        "--pair",
        choices=CCA_PAIRS.keys(),
        default="DL",
        help="DL: demographics/laboratory, BL: body measures/laboratory.",
    )
    sp.add_argument("-k", type=int, default=None, help="Components (default: all).")
    sp.add_argument("--ridge", type=float, default=None, help="Covariance ridge.")
    sp.set_defaults(command=cca_command)

    # Experiment
    sp = subparser.add_parser(
        "experiment",
        help="Run the diabetes classification experiment.",
        description="Compare diabetes classifiers built on NHANES views.",
    )
    sp = get_experiment_parser(sp)
    sp.set_defaults(command=experiment_command)

    # Xport
    sp = subparser.add_parser(
        "xport",
        help="Convert a SAS transport file to CSV.",
        description="Decode one member of an XPORT file and write it as CSV.",
    )
    sp.add_argument("file", help="XPORT file to read", type=Path)
    sp.add_argument(
        "--to",
        help="CSV file to write (default: <out>/<FILE stem>.csv).",
        type=Path,
        default=None,
    )
    sp.add_argument(
        "--member",
        help="Member index or name (default: %(default)s).",
        type=_member,
        default=0,
    )
    sp.add_argument(
        "--keep-missing-codes",
        action="store_true",
        help="Add a <name>_MISSING column holding each SAS missing code.",
    )
    sp.set_defaults(command=xport_command)

    # Template
    sp = subparser.add_parser(
        "template",
        help="Dump an example configuration.",
        description="Dump the example run configuration to file.",
        aliases=["dump"],
    )
    sp.add_argument("file", help="File to write", type=Path)
    sp.add_argument(
        "-f",
        "--format",
        choices=("json", "yaml"),
        help="Dump FILE as this type (default: determine from suffix).",
        default=None,
    )
    sp.set_defaults(command=template_command)

    return arg_parser


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run main entry-point for CLI.

    Parameters
    ----------
    argv : Sequence[str], optional
        Arguments (default: ``sys.argv``).

    Returns
    -------
    int
        Exit status.
    """
    ap = get_arg_parser()
    args = ap.parse_args(argv)

    if args.command is None:
        ap.print_help()
        return 0
    return run_command(args.command, args)
