"""Columnar table with explicit missingness, keyed by respondent sequence number."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import math
from typing import NamedTuple, TypeAlias

import numpy as np
import pandas as pd

from nhanes_multiview.exceptions import DuplicateKey, UnknownColumn

#: NHANES respondent sequence number.
SEQN = "SEQN"

#: Special missing codes SAS may store in a numeric field.
MISSING_CODES = (".", *(f".{chr(letter)}" for letter in range(ord("A"), ord("Z") + 1)), "._")


class Missing(NamedTuple):
    """Missing numeric cell carrying its SAS missing code."""

    #: One of :data:`MISSING_CODES`.
    code: str = "."

    def __str__(self) -> str:
        return self.code


#: A single table cell.
CellValue: TypeAlias = float | str | Missing


def _empty_codes(index: pd.Index) -> pd.DataFrame:
    return pd.DataFrame(index=index, dtype=object)


@dataclass(frozen=True)
class ColumnTable:
    """
    Named columns with explicit missingness.

    Numeric columns are ``float64`` with ``NaN`` marking missing cells; the SAS code of
    each missing numeric cell lives in :attr:`codes`. Text columns are ``object``.

    Parameters
    ----------
    frame : pandas.DataFrame
        Column data, positional index.
    key : str or None
        Name of the unique key column, ``None`` for unkeyed tables.
    codes : pandas.DataFrame
        Missing codes for numeric columns (``None`` where the cell is present).
    provenance : pandas.Series, optional
        Survey cycle label of each row.

    Raises
    ------
    UnknownColumn
        Key column absent.
    DuplicateKey
        Key values repeated.
    """

    frame: pd.DataFrame
    key: str | None = SEQN
    codes: pd.DataFrame = field(default=None)
    provenance: pd.Series | None = None

    def __post_init__(self):
        frame = self.frame.reset_index(drop=True)
        object.__setattr__(self, "frame", frame)

        codes = _empty_codes(frame.index) if self.codes is None else self.codes
        object.__setattr__(self, "codes", codes.reset_index(drop=True))

        if self.provenance is not None:
            prov = pd.Series(self.provenance, dtype=object).reset_index(drop=True)
            object.__setattr__(self, "provenance", prov)

        if self.key is not None:
            if self.key not in frame.columns:
                raise UnknownColumn(f"Key column {self.key!r} not in table")
            dupes = frame[self.key][frame[self.key].duplicated()]
            if len(dupes):
                raise DuplicateKey(
                    f"{len(dupes)} duplicated {self.key} values, e.g. {dupes.iloc[0]!r}",
                )

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence[CellValue]],
        key: str | None = SEQN,
        provenance: Sequence[str] | None = None,
    ) -> ColumnTable:
        """
        Build a table from per-column cell lists.

        Parameters
        ----------
        columns : Mapping[str, Sequence[CellValue]]
            Column name to cells. A column holding any ``str`` becomes a text column.
        key : str or None
            Key column name.
        provenance : Sequence[str], optional
            Cycle label per row.

        Returns
        -------
        ColumnTable
            New table.

        Examples
        --------
        >>> tab = ColumnTable.from_columns({"SEQN": [1.0, 2.0], "BMI": [20.5, Missing(".")]})
        >>> tab.cells("BMI")
        [20.5, Missing(code='.')]
        """
        data = {}
        codes = {}
        for name, cells in columns.items():
            cells = list(cells)
            if any(isinstance(cell, str) and not isinstance(cell, Missing) for cell in cells):
                data[name] = pd.Series(
                    [None if isinstance(cell, Missing) else cell for cell in cells], dtype=object
                )
                continue

            data[name] = pd.Series(
                [math.nan if isinstance(cell, Missing) else float(cell) for cell in cells],
                dtype="float64",
            )
            if any(isinstance(cell, Missing) for cell in cells):
                codes[name] = pd.Series(
                    [cell.code if isinstance(cell, Missing) else None for cell in cells],
                    dtype=object,
                )

        frame = pd.DataFrame(data)
        return cls(
            frame,
            key=key,
            codes=pd.DataFrame(codes, index=frame.index, dtype=object),
            provenance=provenance,
        )

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> list[str]:
        """
        Column names, key included.

        Returns
        -------
        list[str]
            Names in storage order.
        """
        return list(self.frame.columns)

    @property
    def keys(self) -> np.ndarray:
        """
        Key column values.

        Returns
        -------
        numpy.ndarray
            Key values in row order.

        Raises
        ------
        UnknownColumn
            Table has no key.
        """
        if self.key is None:
            raise UnknownColumn("Table has no key column")
        return self.frame[self.key].to_numpy()

    def require(self, names: Sequence[str]) -> None:
        """
        Check that columns exist.

        Parameters
        ----------
        names : Sequence[str]
            Names to check.

        Raises
        ------
        UnknownColumn
            Any name missing.
        """
        absent = [name for name in names if name not in self.frame.columns]
        if absent:
            raise UnknownColumn(f"Unknown column(s) {', '.join(absent)}; have {self.columns}")

    def column(self, name: str) -> pd.Series:
        """
        Get a column's values.

        Parameters
        ----------
        name : str
            Column name.

        Returns
        -------
        pandas.Series
            Column data (``NaN``/``None`` where missing).
        """
        self.require([name])
        return self.frame[name]

    def is_missing(self, name: str) -> np.ndarray:
        """
        Missingness mask of a column.

        Parameters
        ----------
        name : str
            Column name.

        Returns
        -------
        numpy.ndarray
            Boolean mask, ``True`` where missing.
        """
        return self.column(name).isna().to_numpy()

    def cells(self, name: str) -> list[CellValue]:
        """
        Column as cell values with missing codes restored.

        Parameters
        ----------
        name : str
            Column name.

        Returns
        -------
        list[CellValue]
            One cell per row.
        """
        values = self.column(name)
        if values.dtype == object:
            return [None if pd.isna(val) else val for val in values]

        codes = self.codes[name] if name in self.codes.columns else None
        out = []
        for i, val in enumerate(values.to_numpy()):
            if math.isnan(val):
                code = codes.iloc[i] if codes is not None else None
                out.append(Missing(code or "."))
            else:
                out.append(float(val))
        return out

    def take(self, rows: np.ndarray | Sequence[int]) -> ColumnTable:
        """
        Select rows by boolean mask or positions.

        Parameters
        ----------
        rows : numpy.ndarray or Sequence[int]
            Boolean mask or integer positions.

        Returns
        -------
        ColumnTable
            Row subset, same schema.
        """
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return ColumnTable(
            self.frame.iloc[rows],
            key=self.key,
            codes=self.codes.iloc[rows],
            provenance=None if self.provenance is None else self.provenance.iloc[rows],
        )

    def select(self, names: Sequence[str]) -> ColumnTable:
        """
        Select columns, always keeping the key.

        Parameters
        ----------
        names : Sequence[str]
            Columns to keep.

        Returns
        -------
        ColumnTable
            Column subset.
        """
        self.require(names)
        keep = [self.key] if self.key is not None and self.key not in names else []
        keep += list(names)
        return ColumnTable(
            self.frame[keep],
            key=self.key,
            codes=self.codes[[name for name in keep if name in self.codes.columns]],
            provenance=self.provenance,
        )

    def with_columns(self, data: Mapping[str, pd.Series | np.ndarray]) -> ColumnTable:
        """
        Add or replace columns (codes of replaced columns are dropped).

        Parameters
        ----------
        data : Mapping[str, pandas.Series | numpy.ndarray]
            Columns aligned by position.

        Returns
        -------
        ColumnTable
            Extended table.
        """
        frame = self.frame.copy()
        for name, values in data.items():
            frame[name] = np.asarray(values)
        return ColumnTable(
            frame,
            key=self.key,
            codes=self.codes.drop(columns=[n for n in data if n in self.codes.columns]),
            provenance=self.provenance,
        )

    def equals(self, other: ColumnTable) -> bool:
        """
        Cell-for-cell equality, missing codes included.

        Parameters
        ----------
        other : ColumnTable
            Table to compare.

        Returns
        -------
        bool
            Whether both tables hold identical cells in identical order.
        """
        if self.columns != other.columns or len(self) != len(other):
            return False
        return all(self.cells(name) == other.cells(name) for name in self.columns)
