"""Distance weighted discrimination.

Primal problem, over direction ``w``, intercept ``b`` and slacks ``xi``::

    minimize    sum_i 1/r_i + C * sum_i xi_i
    subject to  r_i = y_i (w.x_i + b) + xi_i > 0,  xi_i >= 0,  ||w|| <= 1

Each ``1/r_i <= eta_i`` is the rotated cone ``||(eta_i - r_i, 2)|| <= eta_i + r_i``;
the whole problem is a second-order cone program handed to
:func:`~hdlssd.optimizers.socp.solve_socp`, and the interior-point answer is
finished by a few Newton steps on the slack-eliminated objective. The residuals ``r`` are computed from
``(w, b, xi)``, so the defining equalities hold exactly.

Lagrangian duality gives the dual::

    maximize    2 * sum_i sqrt(a_i) - || sum_i a_i y_i x_i ||
    subject to  0 <= a_i <= C,  sum_i a_i y_i = 0

with ``a_i = 1/r_i^2`` at the optimum. :func:`certify_dwd` builds feasible
dual points (from the residuals and from the solver's multipliers) and
reports the exact duality gap of the best one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import LabeledDataset
from ..errors import ConvergenceError, DataError
from ..numerics import reduce
from .socp import ConeDims, solve_socp

DEFAULT_C = 100.0
MAX_ITER = 200
GAP_TOL = 1e-6
FEAS_TOL = 1e-8


@dataclass(frozen=True)
class DwdSolution:
    w: np.ndarray
    b: float
    xi: np.ndarray
    residuals: np.ndarray
    C: float
    primal: float
    dual: float
    alpha: np.ndarray
    iterations: int

    @property
    def relative_gap(self) -> float:
        return relative_gap(self.primal, self.dual)


def relative_gap(primal, dual) -> float:
    return float((primal - dual) / max(1.0, abs(primal)))


def primal_objective(r, xi, C) -> float:
    return float(np.sum(1.0 / r) + C * np.sum(xi))


def dual_point(r, y, C) -> np.ndarray:
    """Feasible dual multipliers built from primal residuals ``r`` (``1/r^2``)."""
    return project_dual(1.0 / r**2, y, C)


def project_dual(a, y, C) -> np.ndarray:
    """Make multipliers dual feasible.

    ``a`` is clipped to ``[0, C]`` and the larger class total is scaled
    down so that ``sum(a_i y_i) = 0`` holds exactly.
    """
    a = np.clip(np.nan_to_num(np.asarray(a, dtype=float)), 0.0, C)
    pos, neg = y > 0, y < 0
    sp, sn = a[pos].sum(), a[neg].sum()
    if sp > sn:
        a[pos] *= sn / sp
    elif sn > sp:
        a[neg] *= sp / sn
    return a


def dual_objective(alpha, X, y) -> float:
    return float(2.0 * np.sum(np.sqrt(alpha)) - np.linalg.norm(X @ (alpha * y)))


def cone_program(X, y, C):
    """DWD as a second-order cone program in the form used by :func:`solve_socp`.

    Variables are ``(w, b, xi, eta)``; the cones are ``xi >= 0``,
    ``(1, w)`` in the norm cone, and ``(eta_i + r_i, eta_i - r_i, 2)`` per
    sample, which encodes ``eta_i * r_i >= 1``.
    """
    p, n = X.shape
    nx = p + 1 + 2 * n
    w_sl, b_i = slice(0, p), p
    xi_sl, eta_sl = slice(p + 1, p + 1 + n), slice(p + 1 + n, nx)
    c = np.zeros(nx)
    c[xi_sl] = C
    c[eta_sl] = 1.0
    # r = R @ x
    R = np.zeros((n, nx))
    R[:, w_sl] = (X * y).T
    R[:, b_i] = y
    R[:, xi_sl] = np.eye(n)
    E = np.zeros((n, nx))
    E[:, eta_sl] = np.eye(n)

    G_lin = np.zeros((n, nx))
    G_lin[:, xi_sl] = -np.eye(n)
    G_ball = np.zeros((p + 1, nx))
    G_ball[1:, w_sl] = -np.eye(p)
    G_hyp = np.zeros((3 * n, nx))
    G_hyp[0::3] = -(E + R)
    G_hyp[1::3] = -(E - R)
    h = np.concatenate([np.zeros(n), [1.0], np.zeros(p), np.tile([0.0, 0.0, 2.0], n)])
    G = np.vstack([G_lin, G_ball, G_hyp])
    dims = ConeDims(linear=n, soc=(p + 1,) + (3,) * n)
    return c, G, h, dims


def solve_dwd(ds: LabeledDataset, C=DEFAULT_C, use_reduction=None, max_iter=MAX_ITER,
              tol=1e-10) -> DwdSolution:
    """Solve the DWD program; ``use_reduction`` defaults to ``d > n``."""
    if C <= 0:
        raise DataError("C must be positive")
    ds.require_both_classes()
    if use_reduction is None:
        use_reduction = ds.d > ds.n
    if use_reduction:
        red = reduce(ds)
        Xs = red.reduced.data
    else:
        Xs = ds.data
    y = ds.labels.astype(float)
    # solve in units where the penalty is 1 (slack becomes active below
    # margin 1); undone in _solve_scaled
    scale = 1.0 / np.sqrt(C)
    z, alpha, iters = _solve_scaled(Xs, y, C, scale, max_iter, tol)
    p = Xs.shape[0]
    w, b, xi = z[:p], float(z[p]), z[p + 1:].copy()
    polished = _polish(Xs, y, C, w, b)
    lift = red.lift if use_reduction else (lambda v: v)
    sol = _assemble(ds, lift(w), b, xi, C, iters, alpha)
    if polished is not None:
        pw, pb, pxi = polished
        cand = _assemble(ds, lift(pw), pb, pxi, C, iters, alpha)
        if certify_dwd(cand, ds)["relative_gap"] <= certify_dwd(sol, ds)["relative_gap"]:
            sol = cand
    rep = certify_dwd(sol, ds)
    if rep["relative_gap"] > GAP_TOL or rep["violation"] > FEAS_TOL:
        raise ConvergenceError(
            f"DWD solution failed its certificate (gap {rep['relative_gap']:.3e}, "
            f"violation {rep['violation']:.3e})",
            rep,
        )
    return sol


def _solve_scaled(X, y, C, scale, max_iter, tol):
    # with x' = x/s, (w, b, xi) solves the original problem iff (w, b/s, xi/s)
    # solves the scaled one with C' = C s^2 (objective scales by s)
    c, G, h, dims = cone_program(X / scale, y, C * scale**2)
    sol = solve_socp(c, G, h, dims, max_iter=max_iter, tol=tol, feas_tol=tol)
    p, n = X.shape
    z = sol.x[: p + 1 + n].copy()
    z[p:] *= scale
    # multiplier of r_i is z0 - z1 on its 3-cone; it scales like 1/r^2
    zh = sol.z[n + p + 1:].reshape(n, 3)
    alpha = (zh[:, 0] - zh[:, 1]) * C
    return z, alpha, sol.iterations


def _polish(X, y, C, w, b, steps=20):
    """Newton refinement of a near-optimal ``(w, b)`` on the unit sphere.

    Eliminating the slacks leaves ``sum phi(m_i)`` over the margins
    ``m_i = y_i (w.x_i + b)``, with ``phi(m) = 1/m`` above ``1/sqrt(C)`` and
    the tangent line ``2 sqrt(C) - C m`` below; ``phi`` is continuously
    differentiable and convex. When ``||w|| = 1`` is active the optimality
    conditions are ``grad_w + 2 lam w = 0``, ``grad_b = 0``, ``||w||^2 = 1``,
    solved here by Newton's method from the interior-point answer. Returns
    ``(w, b, xi)`` or ``None`` when the constraint is not active or the
    iteration does not settle.
    """
    if np.linalg.norm(w) < 1.0 - 1e-6:
        return None
    t = 1.0 / np.sqrt(C)
    A = np.vstack([X * y, y])        # margins are A^T (w, b)
    p = X.shape[0]
    v = np.append(w / np.linalg.norm(w), b)

    def parts(v):
        m = A.T @ v
        d1 = np.where(m >= t, -1.0 / np.maximum(m, t) ** 2, -C)
        d2 = np.where(m >= t, 2.0 / np.maximum(m, t) ** 3, 0.0)
        return A @ d1, (A * d2) @ A.T

    g, H = parts(v)
    lam = max(0.0, -0.5 * (v[:p] @ g[:p]))
    for _ in range(steps):
        g, H = parts(v)
        F = np.concatenate([g + np.append(2 * lam * v[:p], 0.0), [v[:p] @ v[:p] - 1.0]])
        if np.linalg.norm(F) <= 1e-13 * max(1.0, np.abs(g).max()):
            break
        J = np.zeros((p + 2, p + 2))
        J[: p + 1, : p + 1] = H
        J[np.arange(p), np.arange(p)] += 2 * lam
        J[:p, p + 1] = 2 * v[:p]
        J[p + 1, :p] = 2 * v[:p]
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        v = v + step[: p + 1]
        lam = lam + step[p + 1]
    if not np.all(np.isfinite(v)) or lam < 0:
        return None
    w = v[:p] / np.linalg.norm(v[:p])
    b = float(v[p])
    m = y * (X.T @ w + b)
    return w, b, np.maximum(0.0, t - m)


def best_dual(r, y, C, X, hint=None):
    """Best of the feasible dual points built from ``r`` and from ``hint``."""
    cands = [dual_point(r, y, C)]
    if hint is not None:
        cands.append(project_dual(hint, y, C))
    vals = [dual_objective(a, X, y) for a in cands]
    k = int(np.argmax(vals))
    return cands[k], vals[k]


def _assemble(ds, w, b, xi, C, iters, hint=None) -> DwdSolution:
    X, y = ds.data, ds.labels.astype(float)
    xi = np.maximum(xi, 0.0)
    nw = np.linalg.norm(w)
    if nw > 1.0:
        w = w / nw
    r = y * (X.T @ w + b) + xi
    alpha, dual = best_dual(r, y, C, X, hint)
    return DwdSolution(
        w=w, b=b, xi=xi, residuals=r, C=float(C),
        primal=primal_objective(r, xi, C), dual=dual,
        alpha=alpha, iterations=iters,
    )


def certify_dwd(sol: DwdSolution, ds: LabeledDataset) -> dict:
    """Recompute feasibility and the duality gap from ``(w, b, xi)`` alone."""
    X, y = ds.data, ds.labels.astype(float)
    w, xi, C = np.asarray(sol.w, dtype=float), np.asarray(sol.xi, dtype=float), sol.C
    r = y * (X.T @ w + sol.b) + xi
    violation = max(
        0.0,
        float(np.linalg.norm(w)) - 1.0,
        float(-xi.min()),
        float(np.abs(r - sol.residuals).max()),
    )
    if (r <= 0).any():
        return {"primal": np.inf, "dual": -np.inf, "relative_gap": np.inf,
                "violation": max(violation, float(-r.min())), "certified": False}
    primal = primal_objective(r, np.maximum(xi, 0.0), C)
    # any feasible multipliers bound the optimum from below
    _, dual = best_dual(r, y, C, X, sol.alpha)
    gap = relative_gap(primal, dual)
    return {
        "primal": primal,
        "dual": dual,
        "relative_gap": gap,
        "violation": violation,
        "certified": bool(gap <= GAP_TOL and violation <= FEAS_TOL and (xi >= -1e-10).all()),
    }
