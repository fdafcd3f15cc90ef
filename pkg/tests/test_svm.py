import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdlssd.data import LabeledDataset
from hdlssd.errors import ConvergenceError, DataError
from hdlssd.optimizers import certificate
from hdlssd.optimizers.svm import SvmDualSolution, certify_svm, solve_svm_dual
from oracles import svm_dual_enumeration


def two_point():
    return LabeledDataset(np.array([[1.0, -1.0], [0.0, 0.0]]), [1, -1])


def random_2d(rng, n):
    y = np.array([1, -1] * (n // 2))
    X = rng.normal(size=(2, n)) + 0.8 * y
    return LabeledDataset(X, y)


def test_two_point():
    sol = solve_svm_dual(two_point(), C=1000)
    assert np.allclose(sol.w, [1.0, 0.0], rtol=0, atol=1e-12)
    assert sol.b == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(sol.alpha, [0.5, 0.5], rtol=0, atol=1e-12)
    rep = certificate(sol, two_point())
    assert rep["certified"]
    for key in ("equality", "box", "pair_gap", "complementarity"):
        assert rep[key] < 1e-10


def test_perturbed_alpha_fails_complementarity():
    ds = two_point()
    sol = solve_svm_dual(ds, C=1000)
    bad = SvmDualSolution(**{**sol.__dict__, "alpha": sol.alpha + np.array([0.1, 0.0])})
    rep = certify_svm(bad, ds)
    assert not rep["certified"]
    assert rep["complementarity"] > 1e-6


def test_duplicated_class_points_feasible():
    X = np.array([[1.0, 1.0, 1.0, -1.0, 0.5], [2.0, 2.0, 2.0, 0.0, -1.0]])
    ds = LabeledDataset(X, [1, 1, 1, -1, -1])
    sol = solve_svm_dual(ds, C=10)
    assert sol.alpha.min() >= 0 and sol.alpha.max() <= 10
    assert abs(sol.alpha @ ds.labels) <= 1e-8 * 10 * ds.n
    assert certify_svm(sol, ds)["certified"]


@pytest.mark.parametrize("C", [0.1, 1.0, 1000.0])
def test_matches_enumeration_oracle(C):
    rng = np.random.default_rng(int(C * 10))
    for _ in range(4):
        ds = random_2d(rng, 6)
        sol = solve_svm_dual(ds, C=C)
        best, _ = svm_dual_enumeration(ds.data, ds.labels, C)
        assert sol.objective == pytest.approx(best, abs=1e-6)


def test_free_vectors_pile_on_margins(rng):
    ds = random_2d(rng, 20)
    sol = solve_svm_dual(ds, C=1.0)
    f = ds.labels * (ds.data.T @ sol.w + sol.b)
    assert sol.free.any()
    assert np.abs(f[sol.free] - 1.0).max() <= 1e-6


def test_no_free_vectors_midpoint():
    # tiny C forces every alpha to the upper bound
    ds = LabeledDataset(np.array([[1.0, 2.0, -1.0, -2.0]]), [1, 1, -1, -1])
    sol = solve_svm_dual(ds, C=1e-3)
    assert np.allclose(sol.alpha, 1e-3)
    assert not sol.free.any()
    assert sol.b == pytest.approx(0.0, abs=1e-12)
    assert certify_svm(sol, ds)["certified"]


@given(st.integers(0, 2**31 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    ds = random_2d(rng, 10)
    perm = rng.permutation(10)
    a = solve_svm_dual(ds, C=5.0)
    b = solve_svm_dual(LabeledDataset(ds.data[:, perm], ds.labels[perm]), C=5.0)
    assert a.objective == pytest.approx(b.objective, abs=1e-8)
    assert np.allclose(a.w, b.w, rtol=0, atol=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    d = 4
    y = np.array([1] * 6 + [-1] * 6)
    X = rng.normal(size=(d, 12)) + 0.5 * y
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    a = solve_svm_dual(LabeledDataset(X, y), C=10.0)
    b = solve_svm_dual(LabeledDataset(Q @ X, y), C=10.0)
    assert a.objective == pytest.approx(b.objective, abs=1e-8)
    # the SVM optimum w is unique; b is unique when free vectors exist
    assert np.allclose(Q @ a.w, b.w, rtol=0, atol=1e-8)
    if a.free.any():
        assert a.b == pytest.approx(b.b, abs=1e-8)


def test_update_cap_raises(rng):
    ds = random_2d(rng, 30)
    with pytest.raises(ConvergenceError) as info:
        solve_svm_dual(ds, C=10.0, max_updates=1)
    assert "violation" in info.value.residuals


def test_invalid_inputs():
    with pytest.raises(DataError):
        solve_svm_dual(two_point(), C=0)
    with pytest.raises(DataError):
        solve_svm_dual(LabeledDataset(np.zeros((2, 3)), [1, 1, 1]))


def primal_hinge(w, b, ds, C):
    f = ds.labels * (ds.data.T @ w + b)
    return 0.5 * w @ w + C * np.maximum(0.0, 1.0 - f).sum()


@settings(max_examples=20)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.5, 10.0, 1000.0]))
def test_strong_duality(seed, C):
    # overlapping classes with n > d: rank-deficient Gram, many bounded multipliers
    rng = np.random.default_rng(seed)
    y = np.array([1] * 12 + [-1] * 12)
    ds = LabeledDataset(rng.normal(size=(5, 24)) + 0.3 * y, y)
    sol = solve_svm_dual(ds, C=C, max_updates=20_000)
    p = primal_hinge(sol.w, sol.b, ds, C)
    assert p - sol.objective <= 1e-7 * max(1.0, abs(p))
    assert certify_svm(sol, ds)["certified"]
