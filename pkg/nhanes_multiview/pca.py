"""Principal component analysis on top of the Jacobi eigensolver."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from nhanes_multiview.dumpers import dump_file, load_file
from nhanes_multiview.exceptions import BadK, DimensionMismatch
from nhanes_multiview.linalg import Standardizer, covariance, standardize_fit, sym_eig

#: Named weights of one component.
Loadings = list[tuple[str, float]]


def default_names(dim: int, prefix: str = "x") -> list[str]:
    """
    Placeholder variable names.

    Parameters
    ----------
    dim : int
        Number of variables.
    prefix : str
        Name prefix.

    Returns
    -------
    list[str]
        ``[prefix0, prefix1, ...]``.
    """
    return [f"{prefix}{i}" for i in range(dim)]


def rank_loadings(weights: np.ndarray, names: Sequence[str]) -> Loadings:
    """
    Pair weights with names, largest magnitude first, ties by name.

    Parameters
    ----------
    weights : numpy.ndarray
        One weight per variable.
    names : Sequence[str]
        Variable names.

    Returns
    -------
    Loadings
        Sorted ``(name, weight)`` pairs.

    Examples
    --------
    >>> rank_loadings(np.array([1.0, 2.0]), ["A", "B"])
    [('B', 2.0), ('A', 1.0)]
    """
    pairs = [(name, float(weight)) for name, weight in zip(names, weights, strict=True)]
    return sorted(pairs, key=lambda pair: (-abs(pair[1]), pair[0]))


@dataclass(frozen=True)
class PcaModel:
    """
    Fitted principal directions.

    Parameters
    ----------
    standardizer : Standardizer
        Preprocessing fitted on the training data.
    directions : numpy.ndarray
        ``d x k`` orthonormal principal directions.
    explained_variance : numpy.ndarray
        Variance along each direction, descending.
    total_variance : float
        Trace of the training covariance.
    names : list[str]
        Variable names.
    """

    standardizer: Standardizer
    directions: np.ndarray
    explained_variance: np.ndarray
    total_variance: float
    names: list[str]

    @property
    def k(self) -> int:
        """
        Number of components.

        Returns
        -------
        int
            Component count.
        """
        return self.directions.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        """
        Share of the total variance per component.

        Returns
        -------
        numpy.ndarray
            Ratios in ``[0, 1]``.
        """
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance

    def to_dict(self) -> dict[str, Any]:
        """
        Serializable form.

        Returns
        -------
        dict[str, Any]
            Model parameters.
        """
        return {
            "names": list(self.names),
            "directions": self.directions.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "total_variance": self.total_variance,
            "standardizer": self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PcaModel:
        """
        Rebuild from :meth:`to_dict` output.

        Parameters
        ----------
        data : dict[str, Any]
            Serialized model.

        Returns
        -------
        PcaModel
            Model.
        """
        return cls(
            Standardizer.from_dict(data["standardizer"]),
            np.asarray(data["directions"], dtype=float).reshape(len(data["names"]), -1),
            np.asarray(data["explained_variance"], dtype=float),
            float(data["total_variance"]),
            list(data["names"]),
        )

    def save(self, path: Path | str) -> Path:
        """
        Write as JSON/YAML.

        Parameters
        ----------
        path : Path | str
            Destination.

        Returns
        -------
        Path
            Written path.
        """
        return dump_file(self.to_dict(), path)

    @classmethod
    def load(cls, path: Path | str) -> PcaModel:
        """
        Read a model written by :meth:`save`.

        Parameters
        ----------
        path : Path | str
            Model file.

        Returns
        -------
        PcaModel
            Model.
        """
        return cls.from_dict(load_file(path))


def pca_fit(
    X: Any,
    k: int,
    *,
    standardize: bool = True,
    names: Sequence[str] | None = None,
) -> PcaModel:
    """
    Fit the top-`k` principal directions.

    Parameters
    ----------
    X : array_like
        ``n x d`` training data.
    k : int
        Number of components, ``1 <= k <= d``.
    standardize : bool
        Scale columns to unit variance; ``False`` only centres.
    names : Sequence[str], optional
        Variable names for loadings.

    Returns
    -------
    PcaModel
        Fitted model.

    Raises
    ------
    BadK
        `k` out of range.
    TooFewRows
        Fewer than two rows.
    """
    mat = np.asarray(X, dtype=float)
    dim = mat.shape[1] if mat.ndim == 2 else 1  # noqa: PLR2004
    if not 1 <= k <= dim:
        raise BadK(f"k must be in [1, {dim}], got {k}")

    standardizer, Z = standardize_fit(mat, scale=standardize)
    cov = covariance(Z)
    eig = sym_eig(cov)
    names = list(names) if names is not None else default_names(dim)
    if len(names) != dim:
        raise DimensionMismatch(f"{len(names)} names for {dim} variables")

    return PcaModel(
        standardizer=standardizer,
        directions=eig.vectors[:, :k],
        explained_variance=np.clip(eig.values[:k], 0.0, None),
        total_variance=float(np.trace(cov)),
        names=names,
    )


def pca_transform(model: PcaModel, X: Any) -> np.ndarray:
    """
    Project data onto the principal directions.

    Parameters
    ----------
    model : PcaModel
        Fitted model.
    X : array_like
        Data with the training column count.

    Returns
    -------
    numpy.ndarray
        ``n x k`` scores.

    Raises
    ------
    DimensionMismatch
        Wrong column count.
    """
    return model.standardizer.transform(X) @ model.directions


def pca_loadings(model: PcaModel) -> list[Loadings]:
    """
    Named weights per component, largest magnitude first.

    Parameters
    ----------
    model : PcaModel
        Fitted model.

    Returns
    -------
    list[Loadings]
        One sorted weight list per component.
    """
    return [rank_loadings(model.directions[:, i], model.names) for i in range(model.k)]


def loadings_frame(loadings: Sequence[Loadings], prefix: str = "PC") -> pd.DataFrame:
    """
    Long-form table of loadings for CSV export.

    Parameters
    ----------
    loadings : Sequence[Loadings]
        Per-component loadings.
    prefix : str
        Component label prefix.

    Returns
    -------
    pandas.DataFrame
        Columns ``component``, ``rank``, ``variable``, ``weight``.
    """
    rows = [
        {"component": f"{prefix}{i + 1}", "rank": rank + 1, "variable": name, "weight": weight}
        for i, component in enumerate(loadings)
        for rank, (name, weight) in enumerate(component)
    ]
    return pd.DataFrame(rows, columns=["component", "rank", "variable", "weight"])
