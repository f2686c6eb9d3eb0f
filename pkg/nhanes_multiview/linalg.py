"""
Dense linear algebra kernel shared by PCA, CCA and SVM training.

Matrices are ``numpy`` arrays with samples as rows (``n x d``).
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
import math
from typing import Any, NamedTuple

import numpy as np
from scipy import linalg as sla

from nhanes_multiview.exceptions import (
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    NotSymmetric,
    RowMismatch,
    TooFewRows,
)

logger = logging.getLogger(__name__)

#: Relative off-diagonal magnitude at which Jacobi sweeps stop.
JACOBI_TOL = 1e-12
#: Maximum number of Jacobi sweeps.
JACOBI_MAX_SWEEPS = 100
#: Allowed asymmetry, relative to the Frobenius norm.
SYMMETRY_TOL = 1e-10


def _as_matrix(data: Any, name: str = "matrix") -> np.ndarray:
    mat = np.asarray(data, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.ndim != 2:  # noqa: PLR2004
        raise DimensionMismatch(f"{name} must be 2-D, got shape {mat.shape}")
    return mat


def _require_rows(mat: np.ndarray, minimum: int = 2) -> None:
    if mat.shape[0] < minimum:
        raise TooFewRows(f"Need at least {minimum} rows, got {mat.shape[0]}")


@dataclass(frozen=True)
class Standardizer:
    """
    Per-column centring and scaling.

    Parameters
    ----------
    means : numpy.ndarray
        Column means.
    stds : numpy.ndarray
        Column scales (sample standard deviations, 1 for constant columns).
    constant : numpy.ndarray
        Flags for columns with zero variance.
    """

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray

    @property
    def dim(self) -> int:
        """
        Number of columns.

        Returns
        -------
        int
            Column count.
        """
        return len(self.means)

    def transform(self, X: Any) -> np.ndarray:
        """
        Apply to new data.

        Parameters
        ----------
        X : array_like
            Data with :attr:`dim` columns.

        Returns
        -------
        numpy.ndarray
            Standardized copy.

        Raises
        ------
        DimensionMismatch
            Wrong column count.
        """
        mat = np.asarray(X, dtype=float)
        if mat.ndim == 1:
            mat = mat.reshape(-1, self.dim) if mat.size else np.empty((0, self.dim))
        if mat.shape[1] != self.dim:
            raise DimensionMismatch(f"Expected {self.dim} columns, got {mat.shape[1]}")
        return (mat - self.means) / self.stds

    def to_dict(self) -> dict[str, list]:
        """
        Serializable form.

        Returns
        -------
        dict[str, list]
            Means, scales and constant flags.
        """
        return {
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, list]) -> Standardizer:
        """
        Rebuild from :meth:`to_dict` output.

        Parameters
        ----------
        data : dict[str, list]
            Serialized standardizer.

        Returns
        -------
        Standardizer
            Standardizer.
        """
        return cls(
            np.asarray(data["means"], dtype=float),
            np.asarray(data["stds"], dtype=float),
            np.asarray(data["constant"], dtype=bool),
        )


def standardize_fit(X: Any, *, scale: bool = True) -> tuple[Standardizer, np.ndarray]:
    """
    Fit a z-score standardizer.

    Parameters
    ----------
    X : array_like
        ``n x d`` data.
    scale : bool
        Divide by the sample standard deviation; ``False`` only centres.

    Returns
    -------
    Standardizer
        Fitted parameters.
    numpy.ndarray
        Standardized data; constant columns become zeros and are flagged.

    Raises
    ------
    TooFewRows
        Fewer than two rows.

    Examples
    --------
    >>> std, Z = standardize_fit([[1.0], [3.0]])
    >>> Z.ravel().round(6).tolist()
    [-0.707107, 0.707107]
    """
    mat = _as_matrix(X, "X")
    _require_rows(mat)

    means = mat.mean(axis=0)
    centred = mat - means
    stds = centred.std(axis=0, ddof=1)
    constant = stds <= np.finfo(float).eps * np.maximum(1.0, np.abs(means))
    if constant.any():
        logger.debug("Constant column(s) at %s", np.flatnonzero(constant).tolist())

    stds = np.where(constant | (not scale), 1.0, stds)
    centred[:, constant] = 0.0
    return Standardizer(means, stds, constant), centred / stds


def covariance(Z: Any) -> np.ndarray:
    """
    Sample covariance ``Z^T Z / (n - 1)`` of centred data.

    Parameters
    ----------
    Z : array_like
        Centred ``n x d`` data.

    Returns
    -------
    numpy.ndarray
        Symmetric ``d x d`` matrix.

    Raises
    ------
    TooFewRows
        Fewer than two rows.

    Examples
    --------
    >>> covariance([[1.0], [-1.0]]).tolist()
    [[2.0]]
    """
    mat = _as_matrix(Z, "Z")
    _require_rows(mat)
    cov = mat.T @ mat / (mat.shape[0] - 1)
    return (cov + cov.T) / 2


def cross_covariance(Zx: Any, Zy: Any) -> np.ndarray:
    """
    Sample cross-covariance ``Zx^T Zy / (n - 1)``.

    Parameters
    ----------
    Zx, Zy : array_like
        Row-paired centred views.

    Returns
    -------
    numpy.ndarray
        ``d_x x d_y`` matrix.

    Raises
    ------
    RowMismatch
        Row counts differ.
    TooFewRows
        Fewer than two rows.
    """
    x = _as_matrix(Zx, "Zx")
    y = _as_matrix(Zy, "Zy")
    if x.shape[0] != y.shape[0]:
        raise RowMismatch(f"Views have {x.shape[0]} and {y.shape[0]} rows")
    _require_rows(x)
    return x.T @ y / (x.shape[0] - 1)


class EigenResult(NamedTuple):
    """Symmetric eigendecomposition."""

    #: Eigenvalues, descending.
    values: np.ndarray
    #: Unit eigenvectors as columns, paired with :attr:`values`.
    vectors: np.ndarray


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """
    Flip columns so each one's largest-magnitude entry is positive.

    Parameters
    ----------
    vectors : numpy.ndarray
        Column vectors.

    Returns
    -------
    numpy.ndarray
        Sign-normalized copy.
    """
    if vectors.size == 0:
        return vectors.copy()
    pivots = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(
    A: Any,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> EigenResult:
    """
    Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array_like
        Square symmetric matrix.
    tol : float
        Sweeps stop once every off-diagonal magnitude is at most ``tol * ||A||_F``.
    max_sweeps : int
        Sweep cap.

    Returns
    -------
    EigenResult
        Descending eigenvalues and orthonormal eigenvectors; each vector's
        largest-magnitude entry is positive.

    Raises
    ------
    DimensionMismatch
        `A` not square.
    NotSymmetric
        `A` differs from its transpose by more than ``1e-10 * ||A||_F``.
    NoConvergence
        Sweep cap reached.

    Examples
    --------
    >>> sym_eig([[2.0, 1.0], [1.0, 2.0]]).values.round(12).tolist()
    [3.0, 1.0]
    """
    a = _as_matrix(A, "A").copy()
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatch(f"Matrix must be square, got shape {a.shape}")

    norm = np.linalg.norm(a)
    asym = np.abs(a - a.T).max() if n else 0.0
    if asym > SYMMETRY_TOL * max(norm, 1.0):
        raise NotSymmetric(f"Matrix asymmetry {asym:.3g} exceeds tolerance")

    a = (a + a.T) / 2
    vecs = np.eye(n)
    threshold = tol * norm
    off_diag = ~np.eye(n, dtype=bool)

    for sweep in range(max_sweeps + 1):
        if n < 2 or np.abs(a[off_diag]).max() <= threshold:  # noqa: PLR2004
            break
        if sweep == max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1 / math.hypot(t, 1.0)
                s = t * c

                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p, vec_q = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q

    logger.debug("Jacobi on %dx%d matrix finished after %d sweep(s)", n, n, sweep)
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenResult(values[order], fix_signs(vecs[:, order]))


def chol_solve(A: Any, B: Any) -> np.ndarray:
    """
    Solve ``A X = B`` for symmetric positive definite `A`.

    Parameters
    ----------
    A : array_like
        SPD matrix.
    B : array_like
        Right-hand side(s).

    Returns
    -------
    numpy.ndarray
        Solution with the shape of `B`.

    Raises
    ------
    NotPositiveDefinite
        Cholesky factorization meets a nonpositive pivot.
    DimensionMismatch
        Incompatible shapes.

    Examples
    --------
    >>> chol_solve([[4.0]], [[2.0]]).tolist()
    [[0.5]]
    """
    a = _as_matrix(A, "A")
    b = np.asarray(B, dtype=float)
    if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"Cannot solve {a.shape} system with right-hand side {b.shape}")
    try:
        factor = sla.cho_factor(a, lower=True, check_finite=True)
    except sla.LinAlgError as err:
        raise NotPositiveDefinite(f"Matrix is not positive definite: {err}") from err
    return sla.cho_solve(factor, b)


def inv_sqrt_spd(A: Any) -> np.ndarray:
    """
    Inverse symmetric square root of an SPD matrix.

    Parameters
    ----------
    A : array_like
        SPD matrix.

    Returns
    -------
    numpy.ndarray
        ``A^{-1/2}``.

    Raises
    ------
    NotPositiveDefinite
        A nonpositive eigenvalue.
    """
    values, vectors = sym_eig(A)
    if len(values) and values[-1] <= 0:
        raise NotPositiveDefinite(f"Smallest eigenvalue {values[-1]:.3g} is not positive")
    return (vectors / np.sqrt(values)) @ vectors.T
