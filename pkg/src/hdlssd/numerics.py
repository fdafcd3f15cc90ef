"""Dense linear algebra helpers: truncated SVD, pseudo-inverse, scatter matrices
and the span reduction used to solve d >> n problems in n dimensions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, NEGATIVE, POSITIVE
from .errors import DataError

EPS = np.finfo(float).eps


def _check_finite(M):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise DataError("matrix contains non-finite entries")
    return M


def default_rtol(shape) -> float:
    """Standard numerical-rank tolerance ``max(m, n) * eps`` (relative to sigma_1)."""
    return max(shape) * EPS


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD truncated at numerical rank: ``M ~= U @ diag(s) @ V.T``."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.s.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.V.T


def svd(M, rtol=None) -> SvdFactors:
    """Thin SVD keeping singular values above ``rtol * sigma_1``."""
    M = _check_finite(M)
    if M.ndim != 2:
        raise DataError("svd expects a 2-D matrix")
    if M.size == 0:
        return SvdFactors(np.zeros((M.shape[0], 0)), np.zeros(0), np.zeros((M.shape[1], 0)))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if rtol is None:
        rtol = default_rtol(M.shape)
    r = int(np.count_nonzero(s > rtol * s[0])) if s[0] > 0 else 0
    return SvdFactors(U[:, :r], s[:r], Vt[:r].T)


def pinv(M, rtol=None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse by inverting the retained singular values."""
    f = svd(M, rtol)
    return (f.V / f.s) @ f.U.T


def gram_pinv_apply(Z, v, divisor=1.0, rtol=None) -> np.ndarray:
    """Compute ``(Z Z^T / divisor)^+ v`` from the SVD of ``Z`` alone.

    ``Z`` is ``d x m`` with small ``m``, so the ``d x d`` matrix is never
    formed. A zero ``divisor`` marks a degenerate scatter, taken to be the
    zero matrix whose pseudo-inverse is zero.
    """
    v = np.asarray(v, dtype=float)
    if divisor == 0:
        return np.zeros_like(v)
    f = svd(Z, rtol)
    # eigenvalues of Z Z^T are s^2; same rank cut as an svd of the scatter itself
    return divisor * (f.U @ ((f.U.T @ v) / f.s**2))


@dataclass(frozen=True)
class ScatterMatrices:
    """Scatter statistics of a two-class dataset.

    ``within`` is the pooled within-class scatter divided by ``n - 2`` and
    ``total`` the overall covariance divided by ``n - 1``; a zero divisor
    yields a zero matrix and sets the matching ``*_degenerate`` flag.
    """

    within: np.ndarray
    total: np.ndarray
    mean_pos: np.ndarray
    mean_neg: np.ndarray
    mean: np.ndarray
    within_degenerate: bool
    total_degenerate: bool


def centered_parts(ds: LabeledDataset):
    """Class means, overall mean and the two centered data matrices.

    Returns ``(mean_pos, mean_neg, mean, Zw, Zt)`` where ``Zw`` holds every
    sample minus its class mean and ``Zt`` every sample minus the overall
    mean, so ``within = Zw Zw^T / (n-2)`` and ``total = Zt Zt^T / (n-1)``.
    """
    ds.require_both_classes()
    X, y = ds.data, ds.labels
    mean_pos = X[:, y == POSITIVE].mean(axis=1)
    mean_neg = X[:, y == NEGATIVE].mean(axis=1)
    mean = X.mean(axis=1)
    Zw = X - np.where(y == POSITIVE, 1.0, 0.0) * mean_pos[:, None] - np.where(
        y == NEGATIVE, 1.0, 0.0
    ) * mean_neg[:, None]
    Zt = X - mean[:, None]
    return mean_pos, mean_neg, mean, Zw, Zt


def scatter_matrices(ds: LabeledDataset) -> ScatterMatrices:
    mean_pos, mean_neg, mean, Zw, Zt = centered_parts(ds)
    n = ds.n
    d = ds.d
    within = Zw @ Zw.T / (n - 2) if n > 2 else np.zeros((d, d))
    total = Zt @ Zt.T / (n - 1) if n > 1 else np.zeros((d, d))
    # exact symmetry; the products above are symmetric only up to rounding
    within = 0.5 * (within + within.T)
    total = 0.5 * (total + total.T)
    return ScatterMatrices(within, total, mean_pos, mean_neg, mean, n <= 2, n <= 1)


@dataclass(frozen=True)
class ReducedProblem:
    """Dataset expressed in an orthonormal basis ``Q`` of its column span.

    Any direction that only depends on inner products between samples (SVM,
    DWD) lives in this span, so it can be computed on ``reduced`` and mapped
    back with :meth:`lift`.
    """

    basis: np.ndarray
    reduced: LabeledDataset

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def lift(self, w_reduced) -> np.ndarray:
        return self.basis @ np.asarray(w_reduced, dtype=float)


def reduce(ds: LabeledDataset, rtol=None) -> ReducedProblem:
    f = svd(ds.data, rtol)
    # Q^T X = diag(s) V^T, exact up to the dropped singular values
    reduced = (f.V * f.s).T
    if f.rank == 0:
        reduced = np.zeros((1, ds.n))
        basis = np.zeros((ds.d, 1))
        basis[0, 0] = 1.0
        return ReducedProblem(basis, LabeledDataset(reduced, ds.labels))
    return ReducedProblem(f.U, LabeledDataset(reduced, ds.labels))
