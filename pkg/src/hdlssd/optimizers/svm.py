"""Soft-margin linear SVM via its dual QP.

The dual ``max sum(a) - 1/2 a^T Q a`` with ``Q_ij = y_i y_j <x_i, x_j>``,
``0 <= a_i <= C`` and ``sum(a_i y_i) = 0`` is solved by sequential minimal
optimization with second-order working-set selection, interleaved every
few dozen updates with exact active-set steps on the current face. Only the
Gram matrix is needed, so the cost does not depend on the dimension once it
is formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import LabeledDataset
from ..errors import ConvergenceError, DataError

DEFAULT_C = 1000.0
MAX_UPDATES = 1_000_000
KKT_TOL = 1e-6
FACE_EVERY = 50
_TAU = 1e-12


@dataclass(frozen=True)
class SvmDualSolution:
    alpha: np.ndarray
    w: np.ndarray
    b: float
    C: float
    objective: float
    kkt_residual: float
    iterations: int

    @property
    def free(self) -> np.ndarray:
        return (self.alpha > 0) & (self.alpha < self.C)


def dual_objective(alpha, y, K) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _bound_sets(alpha, y, C):
    up = ((alpha < C) & (y > 0)) | ((alpha > 0) & (y < 0))
    low = ((alpha < C) & (y < 0)) | ((alpha > 0) & (y > 0))
    return up, low


def _violation(G, alpha, y, C):
    """Maximal violating pair gap ``m(a) - M(a)``; the KKT conditions hold iff <= 0."""
    up, low = _bound_sets(alpha, y, C)
    v = -y * G
    if not up.any() or not low.any():
        return 0.0
    return float(v[up].max() - v[low].min())


def intercept(alpha, y, G, C) -> float:
    """Average over free vectors, else the midpoint of the feasible interval."""
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(-yG[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = ~ub_mask
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return float(-(ub + lb) / 2)


def _face_step(alpha, y, Q, G, C):
    """One primal active-set step on the face fixed by the current bounds.

    With the bounded multipliers held fixed, the face problem is an
    equality-constrained quadratic. Its Newton step ``d`` solves
    ``Q_FF d + b y_F = -G_F``, ``y_F . d = 0``. When that system is
    inconsistent the residual is a direction of zero curvature along which
    the objective decreases linearly. Either way the step is cut at the
    first bound, so it reaches the face optimum or pins one more multiplier.
    SMO identifies faces quickly but crawls along flat directions when ``Q``
    is rank deficient (linear kernel with ``n > d``); these steps remove
    that crawl. Returns ``(alpha, G, reached)``.
    """
    F = np.flatnonzero((alpha > 0) & (alpha < C))
    if F.size == 0:
        return alpha, G, True
    m = F.size
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = Q[np.ix_(F, F)]
    A[:m, m] = y[F]
    A[m, :m] = y[F]
    rhs = np.concatenate([-G[F], [0.0]])
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    res = rhs - A @ sol
    if np.linalg.norm(res) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
        d, full = res[:m], np.inf
    else:
        d, full = sol[:m], 1.0
    a = alpha[F]
    with np.errstate(divide="ignore", invalid="ignore"):
        room = np.where(d > 0, (C - a) / d, np.where(d < 0, -a / d, np.inf))
    t = min(full, float(room.min()))
    if not np.isfinite(t) or t <= 0:
        return alpha, G, False
    alpha = alpha.copy()
    new = a + t * d
    # snap to the bound that limited the step
    new[np.abs(new) <= 1e-12 * C] = 0.0
    new[np.abs(new - C) <= 1e-12 * C] = C
    alpha[F] = np.clip(new, 0.0, C)
    return alpha, Q @ alpha - 1.0, t == full


def solve_svm_dual(ds: LabeledDataset, C=DEFAULT_C, tol=1e-10, max_updates=MAX_UPDATES,
                   gram=None) -> SvmDualSolution:
    if C <= 0:
        raise DataError("C must be positive")
    ds.require_both_classes()
    X = ds.data
    y = ds.labels.astype(float)
    n = ds.n
    K = X.T @ X if gram is None else np.asarray(gram, dtype=float)
    Q = K * np.outer(y, y)
    diagQ = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)

    it = 0
    refreshed = False
    while True:
        up, low = _bound_sets(alpha, y, C)
        v = -y * G
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(v[up])])
        m = v[i]
        cand = low & (v < m)
        gap = m - v[low].min()
        if gap <= tol or not cand.any():
            if refreshed:
                break
            # incremental gradient drifts; confirm with an exact recomputation
            G = Q @ alpha - 1.0
            refreshed = True
            continue
        refreshed = False
        if it >= max_updates:
            raise ConvergenceError(
                f"SMO hit the update cap ({max_updates}) with violation {gap:.3e}",
                {"violation": float(gap)},
            )
        it += 1
        idx = np.flatnonzero(cand)
        bdiff = m - v[idx]
        quad = diagQ[i] + diagQ[idx] - 2.0 * y[i] * y[idx] * Q[i, idx]
        quad = np.where(quad > 0, quad, _TAU)
        j = int(idx[np.argmin(-(bdiff**2) / quad)])

        ai_old, aj_old = alpha[i], alpha[j]
        a = Q[i, i] + Q[j, j] - 2.0 * y[i] * y[j] * Q[i, j]
        if a <= 0:
            a = _TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / a
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / a
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)
        if it % FACE_EVERY == 0:
            for _ in range(n):
                alpha, G, reached = _face_step(alpha, y, Q, G, C)
                if reached:
                    break
            # G is exact here
            refreshed = True

    G = Q @ alpha - 1.0
    b = intercept(alpha, y, G, C)
    w = X @ (alpha * y)
    sol = SvmDualSolution(
        alpha=alpha, w=w, b=b, C=float(C), objective=dual_objective(alpha, y, K),
        kkt_residual=0.0, iterations=it,
    )
    report = certify_svm(sol, ds)
    if not report["certified"]:
        raise ConvergenceError(
            f"SMO stopped with an uncertified solution (KKT residual {report['kkt']:.3e})",
            report,
        )
    return SvmDualSolution(**{**sol.__dict__, "kkt_residual": report["kkt"]})


def certify_svm(sol: SvmDualSolution, ds: LabeledDataset) -> dict:
    """Recompute SVM optimality residuals from ``alpha`` and ``b``.

    * ``equality``: ``|sum(a_i y_i)|`` (checked against ``1e-8 * C * n``);
    * ``box``: largest bound violation of ``alpha``;
    * ``pair_gap``: maximal violating pair gap of the dual;
    * ``complementarity``: per point, with ``f_i = y_i (w.x_i + b)``,
      ``|f_i - 1|`` for free vectors, ``max(0, 1 - f_i)`` at ``a_i = 0`` and
      ``max(0, f_i - 1)`` at ``a_i = C``;
    * ``kkt``: the larger of the last two.
    """
    X, y = ds.data, ds.labels.astype(float)
    alpha, C = np.asarray(sol.alpha, dtype=float), sol.C
    w = X @ (alpha * y)
    f = y * (X.T @ w + sol.b)
    G = y * (X.T @ w) - 1.0
    free = (alpha > 0) & (alpha < C)
    comp = np.where(free, np.abs(f - 1.0), 0.0)
    comp = np.where(alpha <= 0, np.maximum(0.0, 1.0 - f), comp)
    comp = np.where(alpha >= C, np.maximum(0.0, f - 1.0), comp)
    pair = max(0.0, _violation(G, alpha, y, C))
    report = {
        "equality": float(abs(alpha @ y)),
        "box": float(max(0.0, -alpha.min(), (alpha - C).max())),
        "pair_gap": pair,
        "complementarity": float(comp.max()),
    }
    report["kkt"] = max(report["pair_gap"], report["complementarity"])
    report["certified"] = bool(
        report["equality"] <= 1e-8 * C * ds.n
        and report["box"] == 0.0
        and report["kkt"] <= KKT_TOL
    )
    return report
