"""Cross-cycle harmonization of raw NHANES tables into per-category views."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Literal, NamedTuple

import numpy as np
import pandas as pd

from nhanes_multiview.dumpers import dump_file, load_file
from nhanes_multiview.exceptions import (
    ConfigError,
    NonPositiveBinWidth,
    RecodeDomainError,
    RuleConflict,
    UnknownColumn,
)
from nhanes_multiview.table import SEQN, ColumnTable

logger = logging.getLogger(__name__)

DATA_FOLDER = Path(__file__).parent / "data"
DEFAULT_RULES = DATA_FOLDER / "rules.json"

#: Column holding the cycle of origin in persisted views.
CYCLE_COLUMN = "CYCLE"
#: Canonical age variable used by adult filters.
AGE = "AGE"

Kind = Literal["continuous", "ordinal", "categorical"]


def _normalize(value: Any) -> Any:
    """Map JSON keys/values onto the float/str domain of table cells."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(value)
    except ValueError:
        return value


def _as_cell(value: Any) -> Any:
    return float(value) if isinstance(value, (int, float)) else value


@dataclass(frozen=True)
class Recode:
    """
    Value map applied to some cycles.

    Parameters
    ----------
    mapping : dict
        Old value to new value (``None`` maps to missing).
    cycles : frozenset[str]
        Cycle labels the map applies to; empty means every cycle.
    """

    mapping: dict
    cycles: frozenset[str] = frozenset()

    def applies(self, cycle: str) -> bool:
        """
        Whether this map covers a cycle.

        Parameters
        ----------
        cycle : str
            Cycle label.

        Returns
        -------
        bool
            Coverage.
        """
        return not self.cycles or cycle in self.cycles


@dataclass(frozen=True)
class Eligibility:
    """
    Row predicate over a canonical variable; failing rows become missing.

    Parameters
    ----------
    variable : str
        Canonical variable read by the predicate.
    min : float, optional
        Inclusive lower bound.
    max : float, optional
        Inclusive upper bound.
    values : tuple, optional
        Admissible values.
    """

    variable: str
    min: float | None = None
    max: float | None = None
    values: tuple | None = None

    def mask(self, column: pd.Series) -> np.ndarray:
        """
        Evaluate the predicate.

        Parameters
        ----------
        column : pandas.Series
            Values of :attr:`variable`.

        Returns
        -------
        numpy.ndarray
            ``True`` where eligible; missing inputs are ineligible.
        """
        keep = column.notna().to_numpy()
        if self.min is not None:
            keep &= (column >= self.min).to_numpy()
        if self.max is not None:
            keep &= (column <= self.max).to_numpy()
        if self.values is not None:
            keep &= column.isin(self.values).to_numpy()
        return keep


@dataclass(frozen=True)
class HarmonizationRule:
    """
    Declarative rename/recode/eligibility rule for one canonical variable.

    Parameters
    ----------
    target : str
        Canonical variable name.
    sources : dict[str, tuple[str, ...]]
        Source variable(s) per cycle label; ``"*"`` covers unlisted cycles.
    recodes : tuple[Recode, ...]
        Value maps; the first covering a cycle is used.
    drop_codes : frozenset
        Raw values meaning refused/don't-know, turned missing before recoding.
    eligibility : Eligibility, optional
        Row predicate.
    kind : Kind
        Encoding class.
    combine : {"first", "mean"}
        Merge of several source variables.
    label : str
        Display label.
    component : str
        Manifest component holding the sources.
    fill : float or str, optional
        Value for rows whose result is missing, applied before eligibility.
    """

    target: str
    sources: dict[str, tuple[str, ...]]
    recodes: tuple[Recode, ...] = ()
    drop_codes: frozenset = frozenset()
    eligibility: Eligibility | None = None
    kind: Kind = "continuous"
    combine: Literal["first", "mean"] = "first"
    label: str = ""
    component: str = ""
    fill: float | str | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> HarmonizationRule:
        """
        Build from a validated rule-file entry.

        Parameters
        ----------
        data : Mapping[str, Any]
            Entry as produced by :data:`~nhanes_multiview.schemas.rules.rule_schema`.

        Returns
        -------
        HarmonizationRule
            Rule.

        Raises
        ------
        ConfigError
            A value map lists the same key twice.
        """
        recodes = []
        for recode in data.get("recodes", []):
            pairs = recode["map"].items() if isinstance(recode["map"], dict) else recode["map"]
            mapping = {}
            for old, new in pairs:
                old = _normalize(old)
                if old in mapping:
                    raise ConfigError(f"Rule {data['target']!r} maps {old!r} twice")
                mapping[old] = _as_cell(new)
            recodes.append(Recode(mapping, frozenset(recode.get("cycles", []))))

        elig = data.get("eligibility")
        return cls(
            target=data["target"],
            sources={
                cycle: (src,) if isinstance(src, str) else tuple(src)
                for cycle, src in data["sources"].items()
            },
            recodes=tuple(recodes),
            drop_codes=frozenset(_normalize(code) for code in data.get("drop_codes", [])),
            eligibility=Eligibility(
                elig["variable"],
                elig.get("min"),
                elig.get("max"),
                None if elig.get("values") is None else tuple(elig["values"]),
            )
            if elig
            else None,
            kind=data.get("kind", "continuous"),
            combine=data.get("combine", "first"),
            label=data.get("label", ""),
            component=data.get("component", ""),
            fill=_as_cell(data.get("fill")),
        )

    def source_for(self, cycle: str) -> tuple[str, ...]:
        """
        Source variables of a cycle.

        Parameters
        ----------
        cycle : str
            Cycle label.

        Returns
        -------
        tuple[str, ...]
            Variable names, empty when the variable does not exist that cycle.
        """
        return self.sources.get(cycle, self.sources.get("*", ()))

    def recode_for(self, cycle: str) -> Recode | None:
        """
        Value map covering a cycle.

        Parameters
        ----------
        cycle : str
            Cycle label.

        Returns
        -------
        Recode or None
            First covering map.
        """
        return next((rec for rec in self.recodes if rec.applies(cycle)), None)


@dataclass(frozen=True)
class ViewRules:
    """
    Rules and source components of one view.

    Parameters
    ----------
    components : tuple[str, ...]
        Manifest components merged before rules apply.
    rules : tuple[HarmonizationRule, ...]
        Rules in output column order.
    """

    components: tuple[str, ...]
    rules: tuple[HarmonizationRule, ...]

    @property
    def kinds(self) -> dict[str, Kind]:
        """
        Encoding class per target.

        Returns
        -------
        dict[str, Kind]
            Target to kind.
        """
        return {rule.target: rule.kind for rule in self.rules}


def load_rules(path: Path | str = DEFAULT_RULES) -> dict[str, ViewRules]:
    """
    Load and validate a rule file.

    Parameters
    ----------
    path : Path | str
        JSON or YAML rule file.

    Returns
    -------
    dict[str, ViewRules]
        Rules per view name.
    """
    from nhanes_multiview.schemas import validate

    data = validate(load_file(path), "rules")
    return {
        name: ViewRules(
            tuple(view["components"]),
            tuple(HarmonizationRule.from_dict(rule) for rule in view["rules"]),
        )
        for name, view in data["views"].items()
    }


def _source_values(table: ColumnTable, rule: HarmonizationRule, cycle: str) -> pd.Series:
    names = [name for name in rule.source_for(cycle) if name in table.frame.columns]
    if not names:
        if rule.source_for(cycle):
            logger.debug("%s: %s absent in %s", rule.target, rule.source_for(cycle), cycle)
        return pd.Series(np.nan, index=table.frame.index, dtype=object)

    block = table.frame[names].astype(object)
    if rule.drop_codes:
        block = block.mask(block.isin(list(rule.drop_codes)))

    if rule.combine == "mean":
        numeric = block.apply(lambda col: pd.to_numeric(col, errors="coerce"))
        return numeric.mean(axis=1, skipna=True).astype(object)

    values = block[names[0]]
    for name in names[1:]:
        values = values.where(values.notna(), block[name])
    return values.map(_normalize)


def _recode(
    values: pd.Series, rule: HarmonizationRule, cycle: str, *, strict: bool
) -> pd.Series:
    recode = rule.recode_for(cycle)
    if recode is None:
        return values

    present = values.notna()
    unmapped = present & ~values.isin(list(recode.mapping))
    if unmapped.any():
        examples = sorted({str(val) for val in values[unmapped]})[:5]
        if strict:
            raise RecodeDomainError(
                f"{rule.target} in {cycle}: no mapping for value(s) {', '.join(examples)}",
            )
        logger.warning(
            "%s in %s: %d unmapped value(s) %s set missing",
            rule.target,
            cycle,
            int(unmapped.sum()),
            ", ".join(examples),
        )

    return values.map(lambda val: recode.mapping.get(val) if pd.notna(val) else None)


def _finalize(values: pd.Series) -> pd.Series:
    if values.map(lambda val: isinstance(val, str)).any():
        return values.astype(object).where(values.notna(), None)
    return pd.to_numeric(values, errors="coerce").astype("float64")


def apply_rules(
    raw: Mapping[str, ColumnTable],
    rules: Sequence[HarmonizationRule],
    *,
    strict: bool = False,
    key: str = SEQN,
) -> ColumnTable:
    """
    Stack per-cycle raw tables into one harmonized table.

    Parameters
    ----------
    raw : Mapping[str, ColumnTable]
        Raw table per cycle label.
    rules : Sequence[HarmonizationRule]
        Rules, one per output column.
    strict : bool
        Raise on values without a mapping instead of setting them missing.
    key : str
        Respondent key column.

    Returns
    -------
    ColumnTable
        Stacked table with one row per raw row and :attr:`provenance` set.

    Raises
    ------
    RuleConflict
        Two rules share a target.
    RecodeDomainError
        Unmapped value in strict mode.
    UnknownColumn
        Eligibility reads a variable no rule produces.

    Examples
    --------
    >>> raw = {"1999-2000": ColumnTable.from_columns({"SEQN": [1.0], "RIDAGEYR": [40.0]})}
    >>> rule = HarmonizationRule("AGE", {"*": ("RIDAGEYR",)})
    >>> apply_rules(raw, [rule]).cells("AGE")
    [40.0]
    """
    targets = [rule.target for rule in rules]
    if dupes := sorted({name for name in targets if targets.count(name) > 1}):
        raise RuleConflict(f"Several rules target {', '.join(dupes)}")

    frames = []
    provenance = []
    for cycle in sorted(raw):
        table = raw[cycle]
        columns = {key: table.column(key).astype("float64")}
        for rule in rules:
            values = _source_values(table, rule, cycle)
            values = _recode(values, rule, cycle, strict=strict)
            if rule.fill is not None:
                values = values.where(values.notna(), rule.fill)
            columns[rule.target] = values
        frames.append(pd.DataFrame(columns))
        provenance += [cycle] * len(table)

    if frames:
        frame = pd.concat(frames, ignore_index=True)
    else:
        frame = pd.DataFrame(columns=[key, *targets])
    for target in targets:
        frame[target] = _finalize(frame[target])

    for rule in rules:
        if rule.eligibility is None:
            continue
        if rule.eligibility.variable not in frame.columns:
            raise UnknownColumn(
                f"Eligibility of {rule.target} reads unknown {rule.eligibility.variable!r}",
            )
        keep = rule.eligibility.mask(frame[rule.eligibility.variable])
        frame.loc[~keep, rule.target] = None if frame[rule.target].dtype == object else np.nan

    return ColumnTable(frame, key=key, provenance=provenance)


def load_raw_cycles(
    files: Iterable[tuple[Any, Path]],
    components: Sequence[str],
    reader=None,
) -> dict[str, ColumnTable]:
    """
    Merge each cycle's component files on ``SEQN``.

    Parameters
    ----------
    files : Iterable[tuple[ComponentRef, Path]]
        Fetched files with their references.
    components : Sequence[str]
        Manifest components to merge; others are ignored.
    reader : Callable[[Path], ColumnTable], optional
        File reader (default: :func:`~nhanes_multiview.xport.read_xport`).

    Returns
    -------
    dict[str, ColumnTable]
        Raw table per cycle label.
    """
    if reader is None:
        from nhanes_multiview.xport import read_xport as reader

    per_cycle: dict[str, pd.DataFrame] = {}
    for ref, path in files:
        if ref.component not in components:
            continue
        frame = reader(path).frame
        label = ref.cycle.label
        if label not in per_cycle:
            per_cycle[label] = frame
            continue
        current = per_cycle[label]
        extra = [col for col in frame.columns if col == SEQN or col not in current.columns]
        per_cycle[label] = current.merge(frame[extra], on=SEQN, how="outer")

    return {label: ColumnTable(frame) for label, frame in per_cycle.items()}


def build_views(
    view_rules: Mapping[str, ViewRules],
    files: Sequence[tuple[Any, Path]],
    *,
    strict: bool = False,
    reader=None,
) -> dict[str, ColumnTable]:
    """
    Build every view of a rule set from fetched files.

    Parameters
    ----------
    view_rules : Mapping[str, ViewRules]
        Rules per view.
    files : Sequence[tuple[ComponentRef, Path]]
        Fetched files across all categories.
    strict : bool
        Strict recoding.
    reader : Callable[[Path], ColumnTable], optional
        File reader.

    Returns
    -------
    dict[str, ColumnTable]
        Harmonized table per view.
    """
    views = {}
    for name, rules in view_rules.items():
        raw = load_raw_cycles(files, rules.components, reader=reader)
        views[name] = apply_rules(raw, rules.rules, strict=strict)
        logger.info("View %s: %d rows x %d variables", name, len(views[name]), len(rules.rules))
    return views


def join_views(
    left: ColumnTable, right: ColumnTable, suffix: str = "_right"
) -> ColumnTable:
    """
    Inner join two tables on their key.

    Parameters
    ----------
    left, right : ColumnTable
        Tables sharing a key column.
    suffix : str
        Suffix for right-hand columns whose names collide.

    Returns
    -------
    ColumnTable
        Rows whose key is in both tables, in left order.

    Raises
    ------
    DuplicateKey
        Either table repeats a key.

    Examples
    --------
    >>> left = ColumnTable.from_columns({"SEQN": [1, 2, 3], "A": [1, 1, 1]})
    >>> right = ColumnTable.from_columns({"SEQN": [2, 3, 4], "B": [0, 0, 0]})
    >>> join_views(left, right).keys.tolist()
    [2.0, 3.0]
    """
    key = left.key
    # Constructing validates uniqueness.
    ColumnTable(left.frame, key=key)
    ColumnTable(right.frame, key=right.key)

    rframe = right.frame.rename(columns={right.key: key})
    rename = {col: f"{col}{suffix}" for col in rframe.columns if col != key and col in left.frame}
    lpos = left.frame.assign(_lpos=np.arange(len(left)))
    rpos = rframe.rename(columns=rename).assign(_rpos=np.arange(len(right)))
    merged = lpos.merge(rpos, on=key, how="inner", sort=False, validate="one_to_one")

    lrows = merged.pop("_lpos").to_numpy()
    rrows = merged.pop("_rpos").to_numpy()
    codes = pd.concat(
        [
            left.codes.iloc[lrows].reset_index(drop=True),
            right.codes.rename(columns=rename).iloc[rrows].reset_index(drop=True),
        ],
        axis=1,
    )
    return ColumnTable(
        merged,
        key=key,
        codes=codes.drop(columns=[key], errors="ignore"),
        provenance=None if left.provenance is None else left.provenance.iloc[lrows],
    )


class CompleteCases(NamedTuple):
    """Complete-case filter result."""

    #: Retained rows.
    table: ColumnTable
    #: Number of rows kept.
    retained: int
    #: Number of rows dropped.
    dropped: int


def complete_cases(table: ColumnTable, columns: Sequence[str]) -> CompleteCases:
    """
    Keep rows with no missing value in the listed columns.

    Parameters
    ----------
    table : ColumnTable
        Input table.
    columns : Sequence[str]
        Columns that must be present.

    Returns
    -------
    CompleteCases
        Filtered table and counts.

    Raises
    ------
    UnknownColumn
        A listed column is absent.
    """
    table.require(columns)
    keep = ~table.frame[list(columns)].isna().any(axis=1).to_numpy()
    result = table.take(keep)
    dropped = len(table) - len(result)
    if dropped:
        logger.info("Complete cases over %d column(s): dropped %d rows", len(columns), dropped)
    return CompleteCases(result, len(result), dropped)


@dataclass(frozen=True)
class ColumnSummary:
    """
    Descriptive statistics of one numeric column over non-missing values.

    Statistics that are undefined for the sample size are ``NaN`` and named in
    :attr:`undefined`.
    """

    count: int
    mean: float
    std: float
    min: float
    p25: float
    p50: float
    p75: float
    max: float
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class SummaryStats:
    """
    Summary of every numeric column of a table.

    Parameters
    ----------
    columns : dict[str, ColumnSummary]
        Statistics per column.
    rows : int
        Rows the summary was computed over.
    """

    columns: dict[str, ColumnSummary]
    rows: int

    def __getitem__(self, name: str) -> ColumnSummary:
        return self.columns[name]

    def to_frame(self) -> pd.DataFrame:
        """
        Tabular form, one row per column.

        Returns
        -------
        pandas.DataFrame
            Statistics indexed by variable.
        """
        frame = pd.DataFrame(
            {
                name: {
                    "count": stats.count,
                    "mean": stats.mean,
                    "std": stats.std,
                    "min": stats.min,
                    "25%": stats.p25,
                    "50%": stats.p50,
                    "75%": stats.p75,
                    "max": stats.max,
                    "undefined": ";".join(stats.undefined),
                }
                for name, stats in self.columns.items()
            },
        ).T
        frame.index.name = "variable"
        return frame


def _summarize_column(values: pd.Series) -> ColumnSummary:
    values = values.dropna().to_numpy(dtype=float)
    if len(values) == 0:
        return ColumnSummary(0, *([np.nan] * 7), undefined=("all",))

    p25, p50, p75 = np.percentile(values, [25, 50, 75])
    std = float(np.std(values, ddof=1)) if len(values) > 1 else np.nan
    return ColumnSummary(
        count=len(values),
        mean=float(values.mean()),
        std=std,
        min=float(values.min()),
        p25=float(p25),
        p50=float(p50),
        p75=float(p75),
        max=float(values.max()),
        undefined=() if len(values) > 1 else ("std",),
    )


def summarize(
    table: ColumnTable,
    *,
    adult_only: bool = False,
    age_column: str = AGE,
    adult_age: float = 20,
    columns: Sequence[str] | None = None,
) -> SummaryStats:
    """
    Per-column descriptive statistics.

    Parameters
    ----------
    table : ColumnTable
        Table to summarize.
    adult_only : bool
        Restrict to rows with age strictly above `adult_age`.
    age_column : str
        Age variable.
    adult_age : float
        Adult threshold.
    columns : Sequence[str], optional
        Columns to summarize (default: every numeric non-key column).

    Returns
    -------
    SummaryStats
        Statistics; percentiles interpolate linearly between closest ranks.

    Examples
    --------
    >>> tab = ColumnTable.from_columns({"X": [1, 2, 3, 4]}, key=None)
    >>> summarize(tab)["X"].p50
    2.5
    """
    if adult_only:
        table = table.take((table.column(age_column) > adult_age).to_numpy())

    if columns is None:
        columns = [
            name
            for name in table.columns
            if name != table.key and table.frame[name].dtype != object
        ]
    table.require(columns)

    summaries = {name: _summarize_column(table.frame[name]) for name in columns}
    return SummaryStats(summaries, len(table))


def _group_label(value: Any) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "missing"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


@dataclass(frozen=True)
class Histogram:
    """
    Left-closed, right-open binned counts.

    Parameters
    ----------
    edges : numpy.ndarray
        Bin edges, one more than bins.
    counts : numpy.ndarray
        Total count per bin.
    groups : dict[str, numpy.ndarray]
        Count per bin for each group label.
    """

    edges: np.ndarray
    counts: np.ndarray
    groups: dict[str, np.ndarray] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """
        Tabular form.

        Returns
        -------
        pandas.DataFrame
            ``bin_start``, ``bin_end``, ``count`` and one ``count_<group>`` per group.
        """
        frame = pd.DataFrame(
            {"bin_start": self.edges[:-1], "bin_end": self.edges[1:], "count": self.counts}
        )
        for label, counts in self.groups.items():
            frame[f"count_{label}"] = counts
        return frame


def histogram(
    table: ColumnTable,
    column: str,
    bin_width: float,
    group_by: str | None = None,
    origin: float = 0.0,
) -> Histogram:
    """
    Bin a numeric column, optionally split by group.

    Parameters
    ----------
    table : ColumnTable
        Source table.
    column : str
        Numeric column.
    bin_width : float
        Bin width.
    group_by : str, optional
        Column whose values partition each bin's count.
    origin : float
        A bin edge; bins are aligned to it.

    Returns
    -------
    Histogram
        Bins spanning the observed range.

    Raises
    ------
    NonPositiveBinWidth
        `bin_width` not strictly positive.

    Examples
    --------
    >>> tab = ColumnTable.from_columns({"AGE": [1, 2, 11, 12]}, key=None)
    >>> histogram(tab, "AGE", 10).counts.tolist()
    [2, 2]
    """
    if not bin_width > 0:
        raise NonPositiveBinWidth(f"Bin width must be positive, got {bin_width}")

    values = table.column(column).to_numpy(dtype=float)
    present = ~np.isnan(values)
    if not present.any():
        return Histogram(np.array([], dtype=float), np.array([], dtype=int))

    index = np.floor((values[present] - origin) / bin_width).astype(int)
    low, high = index.min(), index.max()
    edges = origin + bin_width * np.arange(low, high + 2)
    counts = np.bincount(index - low, minlength=high - low + 1)

    groups = {}
    if group_by is not None:
        labels = np.array([_group_label(val) for val in table.column(group_by)], dtype=object)
        labels = labels[present]
        for label in sorted(set(labels)):
            groups[label] = np.bincount(index[labels == label] - low, minlength=high - low + 1)

    return Histogram(edges, counts, groups)


class DesignMatrix(NamedTuple):
    """Numeric matrix extracted from a table."""

    #: Row-per-respondent values.
    values: np.ndarray
    #: Column names (dummy columns are ``<variable>=<level>``).
    names: list[str]
    #: Respondent keys aligned with rows.
    keys: np.ndarray
    #: Levels per categorical variable; the first level is the dropped baseline.
    encoding: dict[str, list]


def to_design_matrix(
    table: ColumnTable,
    columns: Sequence[str],
    kinds: Mapping[str, Kind] | None = None,
    encoding: Mapping[str, list] | None = None,
    categorical: Literal["onehot", "codes"] = "onehot",
) -> DesignMatrix:
    """
    Numeric design matrix with categoricals one-hot encoded (first level dropped).

    Parameters
    ----------
    table : ColumnTable
        Source table, normally complete-case filtered.
    columns : Sequence[str]
        Variables in output order.
    kinds : Mapping[str, Kind], optional
        Encoding class per variable (default: continuous).
    encoding : Mapping[str, list], optional
        Levels fitted earlier; new levels encode as all-zero dummies.
    categorical : {"onehot", "codes"}
        ``"codes"`` replaces each categorical by the index of its level, one column
        per variable; unseen levels become missing.

    Returns
    -------
    DesignMatrix
        Matrix, names, keys and encoding.
    """
    table.require(columns)
    kinds = kinds or {}
    encoding = dict(encoding or {})
    blocks = []
    names = []

    for name in columns:
        series = table.frame[name]
        if kinds.get(name) != "categorical":
            blocks.append(pd.to_numeric(series, errors="coerce").to_numpy(dtype=float)[:, None])
            names.append(name)
            continue

        levels = encoding.get(name)
        if levels is None:
            levels = sorted(
                series.dropna().unique().tolist(), key=lambda val: (str(type(val)), val)
            )
            encoding[name] = levels
        missing = series.isna().to_numpy()
        if categorical == "codes":
            index = {level: float(pos) for pos, level in enumerate(levels)}
            blocks.append(series.map(index).to_numpy(dtype=float)[:, None])
            names.append(name)
            continue
        for level in levels[1:]:
            dummy = (series == level).to_numpy(dtype=float)
            dummy[missing] = np.nan
            blocks.append(dummy[:, None])
            names.append(f"{name}={_group_label(level)}")

    values = np.hstack(blocks) if blocks else np.empty((len(table), 0))
    keys = table.keys if table.key is not None else np.arange(len(table))
    return DesignMatrix(values, names, keys, encoding)


def write_view(
    table: ColumnTable, path: Path | str, kinds: Mapping[str, Kind] | None = None
) -> Path:
    """
    Persist a view as CSV plus a JSON sidecar typing each column.

    Parameters
    ----------
    table : ColumnTable
        View to write.
    path : Path | str
        CSV destination; the sidecar is written next to it with a ``.json`` suffix.
    kinds : Mapping[str, Kind], optional
        Encoding class per column, recorded in the sidecar.

    Returns
    -------
    Path
        CSV path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kinds = kinds or {}

    out = {}
    meta = []
    for name in table.columns:
        out[name] = table.frame[name]
        has_codes = name in table.codes.columns
        if has_codes:
            out[f"{name}_MISSING"] = table.codes[name]
        meta.append(
            {
                "name": name,
                "type": "text" if table.frame[name].dtype == object else "numeric",
                "kind": kinds.get(name, "continuous"),
                "missing_codes": f"{name}_MISSING" if has_codes else None,
            },
        )
    if table.provenance is not None:
        out[CYCLE_COLUMN] = table.provenance

    pd.DataFrame(out).to_csv(path, index=False, na_rep="", lineterminator="\n")
    dump_file(
        {
            "key": table.key,
            "rows": len(table),
            "columns": meta,
            "provenance": CYCLE_COLUMN if table.provenance is not None else None,
        },
        path.with_suffix(".json"),
    )
    return path


def read_view(path: Path | str) -> tuple[ColumnTable, dict[str, Kind]]:
    """
    Read a view written by :func:`write_view`.

    Parameters
    ----------
    path : Path | str
        CSV file with its JSON sidecar alongside.

    Returns
    -------
    ColumnTable
        View.
    dict[str, Kind]
        Encoding class per column.
    """
    path = Path(path)
    meta = load_file(path.with_suffix(".json"))
    dtypes = {
        col["name"]: (object if col["type"] == "text" else "float64") for col in meta["columns"]
    }
    dtypes |= {col["missing_codes"]: object for col in meta["columns"] if col["missing_codes"]}
    if meta["provenance"]:
        dtypes[meta["provenance"]] = object
    frame = pd.read_csv(path, dtype=dtypes, keep_default_na=False, na_values=[""])

    data = frame[[col["name"] for col in meta["columns"]]].copy()
    codes = pd.DataFrame(
        {
            col["name"]: frame[col["missing_codes"]].where(
                frame[col["missing_codes"]].notna(), None
            )
            for col in meta["columns"]
            if col["missing_codes"]
        },
        index=frame.index,
        dtype=object,
    )
    for col in meta["columns"]:
        if col["type"] == "text":
            data[col["name"]] = data[col["name"]].where(data[col["name"]].notna(), None)

    table = ColumnTable(
        data,
        key=meta["key"],
        codes=codes,
        provenance=frame[meta["provenance"]] if meta["provenance"] else None,
    )
    return table, {col["name"]: col["kind"] for col in meta["columns"]}
