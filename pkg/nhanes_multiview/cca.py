"""Canonical correlation analysis between two row-paired views."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any

import numpy as np

from nhanes_multiview.dumpers import dump_file, load_file
from nhanes_multiview.exceptions import BadK, DimensionMismatch, NotPositiveDefinite, RowMismatch
from nhanes_multiview.linalg import (
    Standardizer,
    chol_solve,
    covariance,
    cross_covariance,
    inv_sqrt_spd,
    standardize_fit,
    sym_eig,
)
from nhanes_multiview.pca import Loadings, default_names, rank_loadings

logger = logging.getLogger(__name__)

#: Default ridge added to both standardized covariances.
DEFAULT_RIDGE = 1e-3
# Squared correlations below this are treated as zero when recovering V.
_DEGENERATE = 1e-12


@dataclass(frozen=True)
class CcaModel:
    """
    Paired canonical projection bases.

    Parameters
    ----------
    std_x, std_y : Standardizer
        Standardization of each view.
    U : numpy.ndarray
        ``d_x x k`` X-side weights.
    V : numpy.ndarray
        ``d_y x k`` Y-side weights.
    correlations : numpy.ndarray
        Canonical correlations, descending in ``[0, 1]``.
    ridge : float
        Ridge used in fit.
    spectrum : numpy.ndarray
        All ``min(d_x, d_y)`` canonical correlations.
    names_x, names_y : list[str]
        Variable names of each view.
    encoding_x, encoding_y : dict[str, list]
        Categorical levels used to encode each view.
    """

    std_x: Standardizer
    std_y: Standardizer
    U: np.ndarray
    V: np.ndarray
    correlations: np.ndarray
    ridge: float
    spectrum: np.ndarray
    names_x: list[str]
    names_y: list[str]
    encoding_x: dict[str, list] = field(default_factory=dict)
    encoding_y: dict[str, list] = field(default_factory=dict)

    @property
    def k(self) -> int:
        """
        Number of components.

        Returns
        -------
        int
            Component count.
        """
        return self.U.shape[1]

    @property
    def retained_fraction(self) -> float:
        """
        Share of the summed canonical correlations held by the fitted components.

        Returns
        -------
        float
            Fraction in ``[0, 1]``; 0 if the views are uncorrelated.
        """
        total = float(self.spectrum.sum())
        return float(self.correlations.sum()) / total if total > 0 else 0.0

    def to_dict(self) -> dict[str, Any]:
        """
        Serializable form.

        Returns
        -------
        dict[str, Any]
            Model parameters.
        """
        return {
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "correlations": self.correlations.tolist(),
            "spectrum": self.spectrum.tolist(),
            "ridge": self.ridge,
            "std_x": self.std_x.to_dict(),
            "std_y": self.std_y.to_dict(),
            "names_x": list(self.names_x),
            "names_y": list(self.names_y),
            "encoding_x": self.encoding_x,
            "encoding_y": self.encoding_y,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CcaModel:
        """
        Rebuild from :meth:`to_dict` output.

        Parameters
        ----------
        data : Mapping[str, Any]
            Serialized model.

        Returns
        -------
        CcaModel
            Model.
        """
        return cls(
            std_x=Standardizer.from_dict(data["std_x"]),
            std_y=Standardizer.from_dict(data["std_y"]),
            U=np.asarray(data["U"], dtype=float).reshape(len(data["names_x"]), -1),
            V=np.asarray(data["V"], dtype=float).reshape(len(data["names_y"]), -1),
            correlations=np.asarray(data["correlations"], dtype=float),
            ridge=float(data["ridge"]),
            spectrum=np.asarray(data["spectrum"], dtype=float),
            names_x=list(data["names_x"]),
            names_y=list(data["names_y"]),
            encoding_x=dict(data.get("encoding_x", {})),
            encoding_y=dict(data.get("encoding_y", {})),
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
    def load(cls, path: Path | str) -> CcaModel:
        """
        Read a model written by :meth:`save`.

        Parameters
        ----------
        path : Path | str
            Model file.

        Returns
        -------
        CcaModel
            Model.
        """
        return cls.from_dict(load_file(path))


def _regularized(Z: np.ndarray, ridge: float) -> np.ndarray:
    return covariance(Z) + ridge * np.eye(Z.shape[1])


def _pd_error(view: str, ridge: float, err: NotPositiveDefinite) -> NotPositiveDefinite:
    return NotPositiveDefinite(
        f"{view} covariance is singular with ridge={ridge:g} ({err}); "
        "the view has collinear or constant columns, raise the ridge",
    )


def cca_fit(
    X: Any,
    Y: Any,
    k: int,
    ridge: float = DEFAULT_RIDGE,
    *,
    names_x: Sequence[str] | None = None,
    names_y: Sequence[str] | None = None,
    encoding_x: Mapping[str, list] | None = None,
    encoding_y: Mapping[str, list] | None = None,
) -> CcaModel:
    """
    Fit `k` canonical component pairs.

    Both views are standardized, their covariances regularized by ``ridge * I``,
    and the symmetric problem ``Wx Cxy Cyy^-1 Cyx Wx`` with ``Wx = Cxx^-1/2`` is
    solved. Y-side weights follow as ``Cyy^-1 Cyx u / sqrt(lambda)``.

    Parameters
    ----------
    X, Y : array_like
        Row-paired views, ``n x d_x`` and ``n x d_y``.
    k : int
        Components, ``1 <= k <= min(d_x, d_y)``.
    ridge : float
        Non-negative ridge on the standardized covariances.
    names_x, names_y : Sequence[str], optional
        Variable names of each view.
    encoding_x, encoding_y : Mapping[str, list], optional
        Categorical encodings, carried into the serialized model.

    Returns
    -------
    CcaModel
        Fitted model. Training projections have unit variance against the
        regularized covariances ``C + ridge * I``. Their sample variance is
        ``1 - ridge * |w|^2`` for a standardized weight ``w``, so it is exactly
        one only when ``ridge=0``.

    Raises
    ------
    RowMismatch
        Views have different row counts.
    BadK
        `k` out of range.
    NotPositiveDefinite
        A view covariance stays singular after the ridge.

    Examples
    --------
    >>> x = np.arange(5.0)[:, None]
    >>> cca_fit(x, 3 * x + 2, 1, ridge=0).correlations.round(8).tolist()
    [1.0]
    """
    x = np.asarray(X, dtype=float)
    y = np.asarray(Y, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    if x.shape[0] != y.shape[0]:
        raise RowMismatch(f"Views have {x.shape[0]} and {y.shape[0]} rows")
    dx, dy = x.shape[1], y.shape[1]
    if not 1 <= k <= min(dx, dy):
        raise BadK(f"k must be in [1, {min(dx, dy)}], got {k}")
    if ridge < 0:
        raise ValueError(f"Ridge must be non-negative, got {ridge}")

    std_x, zx = standardize_fit(x)
    std_y, zy = standardize_fit(y)
    cxx = _regularized(zx, ridge)
    cyy = _regularized(zy, ridge)
    cxy = cross_covariance(zx, zy)

    try:
        wx = inv_sqrt_spd(cxx)
    except NotPositiveDefinite as err:
        raise _pd_error("X", ridge, err) from err
    try:
        cyy_cyx = chol_solve(cyy, cxy.T)
    except NotPositiveDefinite as err:
        raise _pd_error("Y", ridge, err) from err

    eig = sym_eig(wx @ cxy @ cyy_cyx @ wx)
    lambdas = np.clip(eig.values[: min(dx, dy)], 0.0, 1.0)
    spectrum = np.sqrt(lambdas)

    U = wx @ eig.vectors[:, :k]
    V = cyy_cyx @ U
    degenerate = lambdas[:k] <= _DEGENERATE
    V[:, ~degenerate] /= np.sqrt(lambdas[:k][~degenerate])
    if degenerate.any():
        logger.debug("%d canonical component(s) with zero correlation", int(degenerate.sum()))
        try:
            wy = inv_sqrt_spd(cyy)
        except NotPositiveDefinite as err:
            raise _pd_error("Y", ridge, err) from err
        eig_y = sym_eig(wy @ cxy.T @ chol_solve(cxx, cxy) @ wy)
        V[:, degenerate] = (wy @ eig_y.vectors[:, :k])[:, degenerate]

    pivots = np.abs(U).argmax(axis=0)
    signs = np.sign(U[pivots, np.arange(k)])
    signs[signs == 0] = 1.0

    return CcaModel(
        std_x=std_x,
        std_y=std_y,
        U=U * signs,
        V=V * signs,
        correlations=spectrum[:k],
        ridge=float(ridge),
        spectrum=spectrum,
        names_x=list(names_x) if names_x is not None else default_names(dx, "x"),
        names_y=list(names_y) if names_y is not None else default_names(dy, "y"),
        encoding_x=dict(encoding_x or {}),
        encoding_y=dict(encoding_y or {}),
    )


def _project(standardizer: Standardizer, weights: np.ndarray, data: Any) -> np.ndarray:
    mat = np.asarray(data, dtype=float)
    if mat.ndim == 2 and mat.shape[1] != standardizer.dim:  # noqa: PLR2004
        raise DimensionMismatch(f"Expected {standardizer.dim} columns, got {mat.shape[1]}")
    return standardizer.transform(mat) @ weights


def cca_transform_x(model: CcaModel, X: Any) -> np.ndarray:
    """
    Project X-view rows onto the canonical components.

    Parameters
    ----------
    model : CcaModel
        Fitted model.
    X : array_like
        Rows with the X-view columns; need not have been seen in fit.

    Returns
    -------
    numpy.ndarray
        ``n x k`` projections.

    Raises
    ------
    DimensionMismatch
        Wrong column count.
    """
    return _project(model.std_x, model.U, X)


def cca_transform_y(model: CcaModel, Y: Any) -> np.ndarray:
    """
    Project Y-view rows onto the canonical components.

    Parameters
    ----------
    model : CcaModel
        Fitted model.
    Y : array_like
        Rows with the Y-view columns.

    Returns
    -------
    numpy.ndarray
        ``n x k`` projections.

    Raises
    ------
    DimensionMismatch
        Wrong column count.
    """
    return _project(model.std_y, model.V, Y)


def cca_loadings(model: CcaModel) -> list[tuple[Loadings, Loadings]]:
    """
    Named weights of each canonical pair.

    Parameters
    ----------
    model : CcaModel
        Fitted model.

    Returns
    -------
    list[tuple[Loadings, Loadings]]
        ``(x_loadings, y_loadings)`` per component, largest magnitude first.
    """
    return [
        (
            rank_loadings(model.U[:, i], model.names_x),
            rank_loadings(model.V[:, i], model.names_y),
        )
        for i in range(model.k)
    ]
