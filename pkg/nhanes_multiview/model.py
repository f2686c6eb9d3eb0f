"""
SVM classification by Sequential Minimal Optimization, with stratified CV grid search.

Training pairs are chosen as the maximal violating pair of the dual KKT conditions;
the solver stops once ``b_low <= b_up + 2 * tol``, which places every training point
within `tol` of its KKT margin condition.
"""

from __future__ import annotations

from collections import OrderedDict
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Literal, NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from nhanes_multiview.dumpers import dump_file, load_file
from nhanes_multiview.evaluation import roc_auc
from nhanes_multiview.exceptions import (
    LengthMismatch,
    NhanesMultiviewError,
    NotLinearKernel,
    SingleClass,
    TooFewPerClass,
    TooFewRows,
)
from nhanes_multiview.linalg import Standardizer, standardize_fit

logger = logging.getLogger(__name__)

KernelKind = Literal["linear", "rbf"]

#: Multipliers at or below this are not stored as support vectors.
ALPHA_EPS = 1e-12
#: Floor for the second derivative along the pair direction.
ETA_FLOOR = 1e-12
#: Default kernel-row cache limit in megabytes.
CACHE_MB = 256


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel choice.

    Parameters
    ----------
    kind : KernelKind
        ``"linear"`` or ``"rbf"``.
    gamma : float, optional
        RBF width, ``K(a, b) = exp(-gamma * ||a - b||^2)``.

    Raises
    ------
    ValueError
        Unknown kind or non-positive RBF gamma.
    """

    kind: KernelKind = "linear"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"Unknown kernel {self.kind!r}. Valid kernels are: linear, rbf")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise ValueError(f"RBF kernel needs gamma > 0, got {self.gamma}")
        if self.kind == "linear":
            object.__setattr__(self, "gamma", None)

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """
        Kernel matrix between row sets.

        Parameters
        ----------
        A, B : numpy.ndarray
            Row sets with equal column count.

        Returns
        -------
        numpy.ndarray
            ``len(A) x len(B)`` kernel values.
        """
        if self.kind == "linear":
            return A @ B.T
        return np.exp(-self.gamma * cdist(A, B, "sqeuclidean"))

    def __str__(self) -> str:
        return "linear" if self.kind == "linear" else f"rbf(gamma={self.gamma:g})"


class _KernelRows:
    """LRU cache of training kernel rows."""

    def __init__(self, kernel: KernelSpec, data: np.ndarray, cache_mb: float = CACHE_MB):
        self.kernel = kernel
        self.data = data
        self.capacity = max(2, int(cache_mb * 2**20 // (8 * max(len(data), 1))))
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.diag = (
            np.einsum("ij,ij->i", data, data) if kernel.kind == "linear" else np.ones(len(data))
        )

    def __getitem__(self, index: int) -> np.ndarray:
        if index in self.rows:
            self.rows.move_to_end(index)
            return self.rows[index]
        row = self.kernel(self.data[index : index + 1], self.data)[0]
        self.rows[index] = row
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return row


@dataclass(frozen=True)
class SvmModel:
    """
    Trained soft-margin SVM.

    Support vectors live in standardized feature space.

    Parameters
    ----------
    kernel : KernelSpec
        Kernel.
    C : float
        Box constraint.
    support_vectors : numpy.ndarray
        Standardized rows with ``alpha > 1e-12``.
    dual_coefs : numpy.ndarray
        ``alpha_i * y_i`` per support vector.
    bias : float
        Decision offset.
    standardizer : Standardizer
        Feature standardization fitted on the training data.
    converged : bool
        Whether the KKT tolerance was reached before the iteration cap.
    iterations : int
        Pair updates performed.
    """

    kernel: KernelSpec
    C: float
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    standardizer: Standardizer
    converged: bool = True
    iterations: int = 0

    @property
    def n_features(self) -> int:
        """
        Input feature count.

        Returns
        -------
        int
            Feature count.
        """
        return self.standardizer.dim

    def linear_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Primal weights of a linear model.

        Returns
        -------
        numpy.ndarray
            Weights in standardized space, ``w = sum(alpha_i y_i x_i)``.
        numpy.ndarray
            The same weights composed with the standardizer scale (raw space).

        Raises
        ------
        NotLinearKernel
            Kernel is not linear.
        """
        if self.kernel.kind != "linear":
            raise NotLinearKernel(f"Weights need a linear kernel, model uses {self.kernel}")
        weights = self.support_vectors.T @ self.dual_coefs
        if weights.shape == (0,):
            weights = np.zeros(self.n_features)
        return weights, weights / self.standardizer.stds

    def to_dict(self) -> dict[str, Any]:
        """
        Serializable form.

        Returns
        -------
        dict[str, Any]
            Model parameters.
        """
        return {
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma},
            "C": self.C,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "standardizer": self.standardizer.to_dict(),
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SvmModel:
        """
        Rebuild from :meth:`to_dict` output.

        Parameters
        ----------
        data : Mapping[str, Any]
            Serialized model.

        Returns
        -------
        SvmModel
            Model.
        """
        standardizer = Standardizer.from_dict(data["standardizer"])
        return cls(
            kernel=KernelSpec(**data["kernel"]),
            C=float(data["C"]),
            support_vectors=np.asarray(data["support_vectors"], dtype=float).reshape(
                -1, standardizer.dim
            ),
            dual_coefs=np.asarray(data["dual_coefs"], dtype=float),
            bias=float(data["bias"]),
            standardizer=standardizer,
            converged=bool(data.get("converged", True)),
            iterations=int(data.get("iterations", 0)),
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
    def load(cls, path: Path | str) -> SvmModel:
        """
        Read a model written by :meth:`save`.

        Parameters
        ----------
        path : Path | str
            Model file.

        Returns
        -------
        SvmModel
            Model.
        """
        return cls.from_dict(load_file(path))


def as_signs(labels: Iterable) -> np.ndarray:
    """
    Validate a label vector of ``+1``/``-1``.

    Parameters
    ----------
    labels : Iterable
        Labels.

    Returns
    -------
    numpy.ndarray
        Float array of ``+1.0``/``-1.0``.

    Raises
    ------
    ValueError
        Any label other than ``+1``/``-1``.
    """
    y = np.asarray(labels, dtype=float).ravel()
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError(f"Labels must be +1/-1, got {sorted(set(y.tolist()))}")
    return y


def _require_both_classes(y: np.ndarray) -> None:
    if len(np.unique(y)) < 2:  # noqa: PLR2004
        raise SingleClass(f"Need both classes, all {len(y)} labels are {y[0] if len(y) else '-'}")


def svm_train(
    X: Any,
    y: Any,
    kernel: KernelSpec | None = None,
    C: float = 1.0,
    tol: float = 1e-3,
    *,
    max_iter: int | None = None,
    cache_mb: float = CACHE_MB,
) -> SvmModel:
    """
    Train an SVM by SMO.

    Parameters
    ----------
    X : array_like
        ``n x d`` features, standardized internally.
    y : array_like
        ``+1``/``-1`` labels.
    kernel : KernelSpec, optional
        Kernel (default linear).
    C : float
        Box constraint, positive.
    tol : float
        KKT tolerance.
    max_iter : int, optional
        Pair-update cap (default ``100 * n``).
    cache_mb : float
        Kernel-row cache limit.

    Returns
    -------
    SvmModel
        Model; ``converged`` is ``False`` if the cap was hit.

    Raises
    ------
    SingleClass
        Only one label value present.
    TooFewRows
        Fewer than two rows.
    LengthMismatch
        Label count differs from row count.

    Examples
    --------
    >>> model = svm_train([[0.0], [1.0]], [-1, 1], C=1000.0)
    >>> abs(float(decision_scores(model, [[0.5]])[0])) < 1e-6
    True
    """
    kernel = kernel or KernelSpec()
    y = as_signs(y)
    mat = np.asarray(X, dtype=float)
    mat = mat[:, None] if mat.ndim == 1 else mat
    if len(y) != mat.shape[0]:
        raise LengthMismatch(f"{mat.shape[0]} rows but {len(y)} labels")
    if len(y) < 2:  # noqa: PLR2004
        raise TooFewRows(f"Need at least 2 rows, got {len(y)}")
    _require_both_classes(y)
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")

    standardizer, Z = standardize_fit(mat)
    n = len(y)
    max_iter = 100 * n if max_iter is None else max_iter
    rows = _KernelRows(kernel, Z, cache_mb)

    alpha = np.zeros(n)
    # Keerthi's F_t = sum_s alpha_s y_s K_st - y_t.
    F = -y.copy()
    pos = y > 0
    converged = False
    b_up = b_low = 0.0

    for iteration in range(max_iter + 1):
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0))
        f_up = np.where(up, F, np.inf)
        f_low = np.where(low, F, -np.inf)
        i = int(np.argmin(f_up))
        j = int(np.argmax(f_low))
        b_up, b_low = f_up[i], f_low[j]

        if b_low <= b_up + 2 * tol:
            converged = True
            break
        if iteration == max_iter:
            break

        k_i, k_j = rows[i], rows[j]
        eta = max(rows.diag[i] + rows.diag[j] - 2 * k_i[j], ETA_FLOOR)

        a_i, a_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            lower, upper = max(0.0, a_j - a_i), min(C, C + a_j - a_i)
        else:
            lower, upper = max(0.0, a_i + a_j - C), min(C, a_i + a_j)

        new_j = min(max(a_j + y[j] * (F[i] - F[j]) / eta, lower), upper)
        new_i = min(max(a_i + y[i] * y[j] * (a_j - new_j), 0.0), C)
        alpha[i], alpha[j] = new_i, new_j
        F += (new_i - a_i) * y[i] * k_i + (new_j - a_j) * y[j] * k_j

    if not converged:
        logger.warning(
            "SMO hit the %d iteration cap (C=%g, %s); KKT gap %.3g",
            max_iter,
            C,
            kernel,
            b_low - b_up,
        )

    bias = -(b_up + b_low) / 2 if np.isfinite(b_up + b_low) else float(-np.median(F))
    support = alpha > ALPHA_EPS
    return SvmModel(
        kernel=kernel,
        C=float(C),
        support_vectors=Z[support],
        dual_coefs=alpha[support] * y[support],
        bias=float(bias),
        standardizer=standardizer,
        converged=converged,
        iterations=iteration,
    )


def decision_scores(model: SvmModel, X: Any) -> np.ndarray:
    """
    Signed decision values ``sum(alpha_i y_i K(x_i, x)) + b``.

    Parameters
    ----------
    model : SvmModel
        Trained model.
    X : array_like
        Rows with the training feature count.

    Returns
    -------
    numpy.ndarray
        One score per row.

    Raises
    ------
    DimensionMismatch
        Wrong feature count.
    """
    Z = model.standardizer.transform(X)
    if len(Z) == 0:
        return np.empty(0)
    if len(model.dual_coefs) == 0:
        return np.full(len(Z), model.bias)
    return model.kernel(Z, model.support_vectors) @ model.dual_coefs + model.bias


def predict(model: SvmModel, X: Any) -> np.ndarray:
    """
    Predicted labels; a score of exactly 0 maps to ``+1``.

    Parameters
    ----------
    model : SvmModel
        Trained model.
    X : array_like
        Rows to classify.

    Returns
    -------
    numpy.ndarray
        ``+1``/``-1`` integer labels.
    """
    return np.where(decision_scores(model, X) >= 0, 1, -1)


def stratified_kfold(labels: Any, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """
    Split indices into `k` folds with per-class proportions preserved.

    Each class is shuffled and dealt round-robin onto the folds; dealing continues
    from where the previous class stopped so fold sizes differ by at most one.

    Parameters
    ----------
    labels : array_like
        Class label per row.
    k : int
        Number of folds.
    seed : int
        Shuffle seed.

    Returns
    -------
    list[numpy.ndarray]
        Sorted test indices of each fold; together a partition of all rows.

    Raises
    ------
    TooFewPerClass
        A class has fewer than `k` members.

    Examples
    --------
    >>> folds = stratified_kfold([1] * 10 + [-1] * 10, k=5)
    >>> [len(fold) for fold in folds]
    [4, 4, 4, 4, 4]
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    if (counts < k).any():
        small = {str(cls): int(cnt) for cls, cnt in zip(classes, counts, strict=True) if cnt < k}
        raise TooFewPerClass(f"{k} folds need {k} rows per class, have {small}")

    assign = np.empty(len(labels), dtype=int)
    offset = 0
    for cls in classes:
        members = rng.permutation(np.flatnonzero(labels == cls))
        assign[members] = (offset + np.arange(len(members))) % k
        offset += len(members)

    return [np.flatnonzero(assign == fold) for fold in range(k)]


def train_test_split(
    labels: Any, fraction: float = 0.70, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """
    Stratified train/test split of row indices.

    Parameters
    ----------
    labels : array_like
        Class label per row.
    fraction : float
        Training share, in ``(0, 1)``.
    seed : int
        Shuffle seed.

    Returns
    -------
    numpy.ndarray
        Sorted training indices.
    numpy.ndarray
        Sorted test indices.

    Raises
    ------
    SingleClass
        Fewer than two classes.
    """
    labels = np.asarray(labels)
    if not 0 < fraction < 1:
        raise ValueError(f"Split fraction must be in (0, 1), got {fraction}")
    classes = np.unique(labels)
    if len(classes) < 2:  # noqa: PLR2004
        raise SingleClass(f"Need both classes to stratify, got {classes.tolist()}")

    rng = np.random.default_rng(seed)
    train = []
    for cls in classes:
        members = rng.permutation(np.flatnonzero(labels == cls))
        train.append(members[: int(np.floor(fraction * len(members) + 0.5))])

    train_idx = np.sort(np.concatenate(train))
    test_idx = np.setdiff1d(np.arange(len(labels)), train_idx)
    return train_idx, test_idx


class GridCell(NamedTuple):
    """One hyperparameter combination."""

    #: Kernel kind.
    kernel: KernelKind
    #: Box constraint.
    C: float
    #: RBF width, ``None`` for linear.
    gamma: float | None = None

    @property
    def spec(self) -> KernelSpec:
        """
        Kernel of this cell.

        Returns
        -------
        KernelSpec
            Kernel.
        """
        return KernelSpec(self.kernel, self.gamma)

    def __str__(self) -> str:
        return f"{self.spec}, C={self.C:g}"


def expand_grid(grid: Mapping[str, Sequence]) -> list[GridCell]:
    """
    Cartesian grid from a configuration mapping.

    Linear cells are not repeated over gamma.

    Parameters
    ----------
    grid : Mapping[str, Sequence]
        ``{"kernels": [...], "C": [...], "gamma": [...]}``.

    Returns
    -------
    list[GridCell]
        Cells in kernel, C, gamma order.

    Examples
    --------
    >>> cells = expand_grid({"kernels": ["linear", "rbf"], "C": [1], "gamma": [0.1, 1]})
    >>> [str(cell) for cell in cells]
    ['linear, C=1', 'rbf(gamma=0.1), C=1', 'rbf(gamma=1), C=1']
    """
    cells = []
    for kernel in grid["kernels"]:
        for c in grid["C"]:
            if kernel == "linear":
                cells.append(GridCell("linear", float(c)))
            else:
                cells.extend(GridCell(kernel, float(c), float(gamma)) for gamma in grid["gamma"])
    return cells


@dataclass(frozen=True)
class CellScore:
    """
    Cross-validated AUC of one cell.

    Parameters
    ----------
    cell : GridCell
        Hyperparameters.
    fold_aucs : tuple[float, ...]
        Test AUC per fold.
    error : str, optional
        Failure message if training failed.
    """

    cell: GridCell
    fold_aucs: tuple[float, ...] = ()
    error: str | None = None

    @property
    def mean(self) -> float:
        """
        Mean fold AUC.

        Returns
        -------
        float
            Mean, ``NaN`` for failed cells.
        """
        return float(np.mean(self.fold_aucs)) if self.fold_aucs else float("nan")

    @property
    def std(self) -> float:
        """
        Standard deviation of fold AUCs.

        Returns
        -------
        float
            Population standard deviation, ``NaN`` for failed cells.
        """
        return float(np.std(self.fold_aucs)) if self.fold_aucs else float("nan")


@dataclass(frozen=True)
class GridSearchResult:
    """
    Outcome of a grid search.

    Parameters
    ----------
    best : GridCell
        Cell with maximal mean AUC after tie-breaking.
    scores : list[CellScore]
        Scores in grid order.
    folds : int
        Folds per cell.
    """

    best: GridCell
    scores: list[CellScore] = field(default_factory=list)
    folds: int = 5

    @property
    def best_score(self) -> CellScore:
        """
        Score of :attr:`best`.

        Returns
        -------
        CellScore
            Best cell's score.
        """
        return next(score for score in self.scores if score.cell == self.best)

    def to_rows(self) -> list[dict[str, Any]]:
        """
        Tabular form.

        Returns
        -------
        list[dict[str, Any]]
            One row per cell.
        """
        return [
            {
                "kernel": score.cell.kernel,
                "C": score.cell.C,
                "gamma": score.cell.gamma,
                "mean_auc": score.mean,
                "std_auc": score.std,
                "error": score.error,
            }
            for score in self.scores
        ]


def _tie_key(score: CellScore) -> tuple:
    cell = score.cell
    return (-score.mean, cell.C, cell.gamma or 0.0, cell.kernel != "linear")


def _evaluate_cell(
    args: tuple[GridCell, np.ndarray, np.ndarray, list[np.ndarray], float],
) -> CellScore:
    cell, X, y, folds, tol = args
    aucs = []
    try:
        for test in folds:
            train = np.setdiff1d(np.arange(len(y)), test)
            model = svm_train(X[train], y[train], cell.spec, cell.C, tol)
            aucs.append(roc_auc(y[test], decision_scores(model, X[test])))
    except (NhanesMultiviewError, ArithmeticError) as err:
        return CellScore(cell, error=f"{type(err).__name__}: {err}")
    return CellScore(cell, tuple(aucs))


def grid_search(
    X: Any,
    y: Any,
    grid: Sequence[GridCell],
    seed: int = 0,
    *,
    folds: int = 5,
    tol: float = 1e-3,
    n_jobs: int = 1,
) -> GridSearchResult:
    """
    Select hyperparameters by stratified k-fold ROC-AUC.

    Parameters
    ----------
    X : array_like
        Training features.
    y : array_like
        ``+1``/``-1`` labels.
    grid : Sequence[GridCell]
        Candidate cells, nonempty.
    seed : int
        Fold seed; identical folds are used for every cell.
    folds : int
        Number of folds.
    tol : float
        SMO tolerance.
    n_jobs : int
        Worker processes; results are merged in grid order.

    Returns
    -------
    GridSearchResult
        Best cell and all scores. Ties go to smaller C, then smaller gamma,
        then linear before rbf.

    Raises
    ------
    ValueError
        Empty grid.
    NhanesMultiviewError
        Every cell failed.
    """
    if not grid:
        raise ValueError("Grid is empty")
    mat = np.asarray(X, dtype=float)
    y = as_signs(y)
    fold_index = stratified_kfold(y, folds, seed)
    jobs = [(cell, mat, y, fold_index, tol) for cell in grid]

    if n_jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(_evaluate_cell, jobs))
    else:
        scores = [_evaluate_cell(job) for job in jobs]

    for score in scores:
        if score.error:
            logger.warning("Grid cell %s failed: %s", score.cell, score.error)
        else:
            logger.debug("Grid cell %s: AUC %.4f +/- %.4f", score.cell, score.mean, score.std)

    valid = [score for score in scores if score.error is None]
    if not valid:
        raise NhanesMultiviewError(f"All {len(grid)} grid cells failed: {scores[0].error}")

    best = min(valid, key=_tie_key)
    logger.info("Best cell %s with mean AUC %.4f", best.cell, best.mean)
    return GridSearchResult(best.cell, scores, folds)
