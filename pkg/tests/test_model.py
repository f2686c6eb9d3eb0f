"""Tests for SMO training, stratified resampling and the grid search."""

from __future__ import annotations

import numpy as np
import pytest

from nhanes_multiview.exceptions import (
    LengthMismatch,
    NotLinearKernel,
    SingleClass,
    TooFewPerClass,
)
from nhanes_multiview.linalg import Standardizer
from nhanes_multiview.model import (
    GridCell,
    KernelSpec,
    SvmModel,
    decision_scores,
    expand_grid,
    grid_search,
    predict,
    stratified_kfold,
    svm_train,
    train_test_split,
)

XOR = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_LABELS = np.array([-1, -1, 1, 1])


@pytest.fixture
def noisy(rng):
    X = rng.normal(size=(60, 2))
    y = np.where(X[:, 0] + 0.5 * X[:, 1] + 0.5 * rng.normal(size=60) > 0, 1, -1)
    return X, y


def training_alphas(model, X):
    Z = model.standardizer.transform(X)
    alpha = np.zeros(len(Z))
    for sv, coef in zip(model.support_vectors, model.dual_coefs, strict=True):
        alpha[np.argmin(((Z - sv) ** 2).sum(axis=1))] = abs(coef)
    return alpha


def assert_kkt(model, X, y, tol):
    alpha = training_alphas(model, X)
    margin = y * decision_scores(model, X)
    eps = 2 * tol + 1e-9
    free = (alpha > 0) & (alpha < model.C - 1e-9)
    at_bound = alpha >= model.C - 1e-9

    assert np.all(margin[alpha == 0] >= 1 - eps)
    assert np.all(margin[at_bound] <= 1 + eps)
    assert np.all(np.abs(margin[free] - 1) <= eps)


def separable_instance(rng):
    """2-D points on both sides of a random line, none within a band around it."""
    n = int(rng.integers(20, 81))
    angle = rng.uniform(0, 2 * np.pi)
    normal = np.array([np.cos(angle), np.sin(angle)])
    offset = rng.uniform(-0.5, 0.5)
    X = np.empty((0, 2))
    while len(X) < n:
        batch = rng.normal(size=(2 * n, 2)) * rng.uniform(0.5, 3.0)
        X = np.vstack([X, batch[np.abs(batch @ normal - offset) >= 0.5]])
    X = X[:n]
    y = np.where(X @ normal > offset, 1, -1)
    y[:2] = [1, -1]
    X[:2] = offset * normal + np.outer([1.0, -1.0], normal)
    return X, y


def test_two_point_boundary():
    model = svm_train([[0.0], [1.0]], [-1, 1], C=1000.0)
    assert model.converged
    assert decision_scores(model, [[0.5]])[0] == pytest.approx(0.0, abs=1e-9)
    assert decision_scores(model, [[0.0]])[0] < 0 < decision_scores(model, [[1.0]])[0]
    assert predict(model, [[-3.0], [4.0]]).tolist() == [-1, 1]


def test_xor_with_rbf():
    model = svm_train(XOR, XOR_LABELS, KernelSpec("rbf", 1.0), C=10.0)
    assert model.converged
    assert predict(model, XOR).tolist() == XOR_LABELS.tolist()


def test_xor_not_linear():
    model = svm_train(XOR, XOR_LABELS, C=10.0)
    with pytest.raises(NotLinearKernel):
        svm_train(XOR, XOR_LABELS, KernelSpec("rbf", 1.0)).linear_weights()
    assert (predict(model, XOR) == XOR_LABELS).mean() < 1


@pytest.mark.parametrize("kernel", [KernelSpec(), KernelSpec("rbf", 0.5)], ids=str)
def test_kkt_conditions(noisy, kernel):
    X, y = noisy
    tol = 1e-3
    model = svm_train(X, y, kernel, C=1.0, tol=tol)
    assert model.converged
    assert_kkt(model, X, y, tol)


def test_separable_instances(rng):
    tol = 1e-3
    for _ in range(200):
        X, y = separable_instance(rng)
        model = svm_train(X, y, C=100.0, tol=tol)
        assert model.converged
        assert_kkt(model, X, y, tol)
        assert (predict(model, X) == y).all()


def test_dual_feasibility(noisy):
    X, y = noisy
    model = svm_train(X, y, C=0.5)
    assert abs(model.dual_coefs.sum()) <= 1e-9
    assert np.all(np.abs(model.dual_coefs) <= model.C + 1e-12)
    assert np.all(np.abs(model.dual_coefs) > 0)


def test_linear_weights_reproduce_scores(noisy):
    X, y = noisy
    model = svm_train(X, y, C=1.0)
    standardized, raw = model.linear_weights()
    scores = decision_scores(model, X)

    np.testing.assert_allclose(model.standardizer.transform(X) @ standardized + model.bias, scores)
    offset = model.bias - model.standardizer.means @ raw
    np.testing.assert_allclose(X @ raw + offset, scores)


def test_zero_score_predicts_positive():
    model = SvmModel(
        kernel=KernelSpec(),
        C=1.0,
        support_vectors=np.empty((0, 1)),
        dual_coefs=np.empty(0),
        bias=0.0,
        standardizer=Standardizer(np.zeros(1), np.ones(1), np.zeros(1, dtype=bool)),
    )
    assert predict(model, [[2.0], [-2.0]]).tolist() == [1, 1]
    assert np.array_equal(model.linear_weights()[0], np.zeros(1))


def test_empty_input(noisy):
    X, y = noisy
    model = svm_train(X, y)
    assert decision_scores(model, np.empty((0, 2))).shape == (0,)
    assert predict(model, np.empty((0, 2))).shape == (0,)


def test_training_errors():
    with pytest.raises(SingleClass):
        svm_train([[0.0], [1.0]], [1, 1])
    with pytest.raises(LengthMismatch):
        svm_train([[0.0], [1.0]], [1, -1, 1])
    with pytest.raises(ValueError, match="C must be positive"):
        svm_train([[0.0], [1.0]], [1, -1], C=0)
    with pytest.raises(ValueError, match="Labels"):
        svm_train([[0.0], [1.0]], [0, 1])


def test_kernel_spec_validation():
    with pytest.raises(ValueError, match="Unknown kernel"):
        KernelSpec("poly")
    with pytest.raises(ValueError, match="gamma"):
        KernelSpec("rbf")
    assert KernelSpec("linear", 3.0).gamma is None
    assert str(KernelSpec("rbf", 0.5)) == "rbf(gamma=0.5)"


def test_small_cache_same_model(noisy):
    X, y = noisy
    big = svm_train(X, y, KernelSpec("rbf", 0.5))
    small = svm_train(X, y, KernelSpec("rbf", 0.5), cache_mb=1e-6)
    np.testing.assert_array_equal(big.dual_coefs, small.dual_coefs)
    assert big.bias == small.bias


def test_iteration_cap(noisy, caplog):
    X, y = noisy
    model = svm_train(X, y, C=10.0, max_iter=1)
    assert not model.converged
    assert "iteration cap" in caplog.text


def test_save_load(noisy, tmp_path):
    X, y = noisy
    model = svm_train(X, y, KernelSpec("rbf", 0.5), C=2.0)
    back = SvmModel.load(model.save(tmp_path / "svm.json"))
    assert back.kernel == model.kernel
    np.testing.assert_allclose(decision_scores(back, X), decision_scores(model, X))


def test_folds_are_stratified():
    labels = np.array([1] * 10 + [-1] * 10)
    folds = stratified_kfold(labels, k=5, seed=3)
    assert len(folds) == 5
    for fold in folds:
        assert (labels[fold] == 1).sum() == 2
        assert (labels[fold] == -1).sum() == 2
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(20))


def test_fold_sizes_balanced():
    labels = np.array([1] * 7 + [-1] * 13)
    sizes = [len(fold) for fold in stratified_kfold(labels, k=5)]
    assert sum(sizes) == 20
    assert max(sizes) - min(sizes) <= 1


def test_folds_deterministic():
    labels = np.array([1, -1] * 15)
    first = stratified_kfold(labels, k=3, seed=7)
    again = stratified_kfold(labels, k=3, seed=7)
    assert all(np.array_equal(a, b) for a, b in zip(first, again, strict=True))
    other = stratified_kfold(labels, k=3, seed=8)
    assert not all(np.array_equal(a, b) for a, b in zip(first, other, strict=True))


def test_folds_need_enough_per_class():
    with pytest.raises(TooFewPerClass):
        stratified_kfold([1, 1, 1] + [-1] * 10, k=5)


def test_split_sizes():
    labels = np.array([1] * 10 + [-1] * 10)
    train, test = train_test_split(labels, 0.7, seed=1)
    assert len(train) == 14
    assert len(test) == 6
    assert (labels[train] == 1).sum() == 7
    assert np.intersect1d(train, test).size == 0
    assert np.array_equal(np.union1d(train, test), np.arange(20))


def test_split_errors():
    with pytest.raises(SingleClass):
        train_test_split([1, 1, 1])
    with pytest.raises(ValueError, match="fraction"):
        train_test_split([1, -1], 1.0)


def test_expand_grid():
    cells = expand_grid({"kernels": ["linear", "rbf"], "C": [0.1, 1], "gamma": [0.01, 0.1]})
    assert len(cells) == 6
    assert cells[0] == GridCell("linear", 0.1)
    assert cells[-1] == GridCell("rbf", 1.0, 0.1)


@pytest.fixture
def separable():
    x = np.r_[np.arange(1.0, 11.0), -np.arange(1.0, 11.0)]
    return x[:, None], np.where(x > 0, 1, -1)


def test_grid_single_cell(separable):
    X, y = separable
    result = grid_search(X, y, [GridCell("linear", 1.0)])
    assert result.best == GridCell("linear", 1.0)
    assert result.best_score.fold_aucs == (1.0,) * 5
    assert len(result.to_rows()) == 1


def test_grid_tie_prefers_smaller_c(separable):
    X, y = separable
    cells = [GridCell("linear", c) for c in (10.0, 1.0, 0.1)]
    result = grid_search(X, y, cells)
    assert all(score.mean == 1.0 for score in result.scores)
    assert result.best.C == 0.1
    assert [score.cell for score in result.scores] == cells


def test_grid_parallel_matches_serial(noisy):
    X, y = noisy
    cells = expand_grid({"kernels": ["linear", "rbf"], "C": [1.0], "gamma": [0.5]})
    serial = grid_search(X, y, cells, seed=2)
    parallel = grid_search(X, y, cells, seed=2, n_jobs=2)
    assert serial.to_rows() == parallel.to_rows()
    assert serial.best == parallel.best


def test_grid_rejects_empty(separable):
    X, y = separable
    with pytest.raises(ValueError, match="empty"):
        grid_search(X, y, [])
