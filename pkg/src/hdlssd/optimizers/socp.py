"""Small dense primal-dual interior-point solver for second-order cone programs.

Solves::

    minimize    c^T x
    subject to  G x + s = h,   s in K

where ``K`` is a product of a nonnegative orthant of dimension ``dims.linear``
and second-order cones ``{u : u_0 >= ||u_1:||}`` of sizes ``dims.soc``
(rows of ``G`` are ordered the same way). The dual is::

    maximize    -h^T z
    subject to  G^T z + c = 0,   z in K

Iterations use Nesterov-Todd scaling with a Mehrotra predictor-corrector
step. Each Newton system is solved densely in its augmented (symmetric
indefinite) form, which is fine for the few hundred variables the
classifiers produce after span reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError


@dataclass(frozen=True)
class ConeDims:
    linear: int = 0
    soc: tuple = ()

    @property
    def size(self) -> int:
        return self.linear + sum(self.soc)

    @property
    def degree(self) -> int:
        return self.linear + len(self.soc)

    def soc_slices(self):
        start = self.linear
        for k in self.soc:
            yield slice(start, start + k)
            start += k


@dataclass
class ConeSolution:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    primal: float
    dual: float
    iterations: int
    status: str
    history: list = field(default_factory=list)


def identity(dims: ConeDims) -> np.ndarray:
    e = np.zeros(dims.size)
    e[: dims.linear] = 1.0
    for sl in dims.soc_slices():
        e[sl.start] = 1.0
    return e


def min_eig(u, dims: ConeDims) -> float:
    """Smallest 'eigenvalue' of ``u``; positive iff ``u`` is in the interior."""
    vals = [np.min(u[: dims.linear])] if dims.linear else []
    for sl in dims.soc_slices():
        v = u[sl]
        vals.append(v[0] - np.linalg.norm(v[1:]))
    return float(min(vals))


def jordan(u, v, dims):
    out = u * v
    for sl in dims.soc_slices():
        a, b = u[sl], v[sl]
        out[sl.start] = a @ b
        out[sl.start + 1: sl.stop] = a[0] * b[1:] + b[0] * a[1:]
    return out


def jordan_solve(lam, d, dims):
    """Solve ``lam o x = d`` for ``x``."""
    out = np.empty_like(d)
    nl = dims.linear
    out[:nl] = d[:nl] / lam[:nl]
    for sl in dims.soc_slices():
        l, dd = lam[sl], d[sl]
        det = l[0] ** 2 - l[1:] @ l[1:]
        x0 = (l[0] * dd[0] - l[1:] @ dd[1:]) / det
        out[sl.start] = x0
        out[sl.start + 1: sl.stop] = (dd[1:] - x0 * l[1:]) / l[0]
    return out


def nt_scaling(s, z, dims):
    """Block-diagonal Nesterov-Todd scaling ``W`` with ``W s = W^-1 z``."""
    m = dims.size
    W = np.zeros((m, m))
    Winv = np.zeros((m, m))
    nl = dims.linear
    if nl:
        d = np.sqrt(s[:nl] / z[:nl])
        W[:nl, :nl] = np.diag(1.0 / d)
        Winv[:nl, :nl] = np.diag(d)
    for sl in dims.soc_slices():
        ss, zz = s[sl], z[sl]
        k = ss.size
        J = -np.eye(k)
        J[0, 0] = 1.0
        sn = np.sqrt(ss[0] ** 2 - ss[1:] @ ss[1:])
        zn = np.sqrt(zz[0] ** 2 - zz[1:] @ zz[1:])
        sb, zb = ss / sn, zz / zn
        gamma = np.sqrt((1.0 + sb @ zb) / 2.0)
        wb = (sb + J @ zb) / (2.0 * gamma)
        beta = np.sqrt(sn / zn)
        v = wb.copy()
        v[0] += 1.0
        v /= np.sqrt(2.0 * (wb[0] + 1.0))
        W[sl, sl] = (1.0 / beta) * (2.0 * np.outer(J @ v, J @ v) - J)
        Winv[sl, sl] = beta * (2.0 * np.outer(v, v) - J)
    return W, Winv


def max_step(u, du, dims) -> float:
    """Largest ``a`` with ``u + a du`` in the cone (``inf`` if unbounded)."""
    a = np.inf
    nl = dims.linear
    if nl:
        neg = du[:nl] < 0
        if neg.any():
            a = min(a, float(np.min(-u[:nl][neg] / du[:nl][neg])))
    for sl in dims.soc_slices():
        x, dx = u[sl], du[sl]
        # q(t) = (x0 + t dx0)^2 - ||x1 + t dx1||^2; q(0) > 0
        qa = dx[0] ** 2 - dx[1:] @ dx[1:]
        qb = x[0] * dx[0] - x[1:] @ dx[1:]
        qc = x[0] ** 2 - x[1:] @ x[1:]
        roots = []
        if abs(qa) > 1e-300:
            disc = qb * qb - qa * qc
            if disc >= 0:
                sq = np.sqrt(disc)
                # numerically stable pair of roots
                q = -(qb + np.copysign(sq, qb))
                cands = [q / qa] + ([qc / q] if q != 0 else [])
                roots = [r for r in cands if r > 0]
        elif qb < 0:
            roots = [-qc / (2.0 * qb)]
        if roots:
            a = min(a, min(roots))
        # the x0 >= 0 branch can only be left through the apex, covered above
        if dx[0] < 0 and not roots:
            a = min(a, -x[0] / dx[0])
    return a


def solve_socp(c, G, h, dims: ConeDims, max_iter=200, tol=1e-10, feas_tol=1e-10):
    """Return an optimal :class:`ConeSolution`.

    Stops when the relative gap is below ``tol`` and both scaled residuals
    below ``feas_tol``. If the iteration breaks down first (step collapse,
    loss of accuracy near the boundary), the best iterate seen is returned
    with status ``"inaccurate"`` provided its merit is below 1e-6.
    """
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    m = dims.size
    deg = dims.degree
    e = identity(dims)

    # initial point: least-squares primal and dual, pushed into the cone
    x = np.linalg.lstsq(G, h, rcond=None)[0]
    s = h - G @ x
    z = -G @ np.linalg.lstsq(G.T @ G, c, rcond=None)[0]
    for u in (s, z):
        a = min_eig(u, dims)
        if a <= 0:
            u += (1.0 - a) * e

    hist = []
    c_scale = max(1.0, np.linalg.norm(c))
    h_scale = max(1.0, np.linalg.norm(h))
    best = None
    for it in range(max_iter + 1):
        rx = G.T @ z + c
        rz = G @ x + s - h
        gap = float(s @ z)
        pobj = float(c @ x)
        dobj = float(-h @ z)
        pres = np.linalg.norm(rz) / h_scale
        dres = np.linalg.norm(rx) / c_scale
        relgap = gap / max(1.0, abs(pobj))
        hist.append((pobj, dobj, gap, pres, dres))
        merit = max(relgap, pres, dres)
        if not np.isfinite(merit):
            break
        if best is None or merit < best[0]:
            best = (merit, x.copy(), s.copy(), z.copy(), it)
        elif it - best[4] >= 5:
            # rounding dominates the Newton directions; no further progress
            break
        if relgap <= tol and pres <= feas_tol and dres <= feas_tol:
            return ConeSolution(x, s, z, pobj, dobj, it, "optimal", hist)
        if it == max_iter:
            break

        W, Winv = nt_scaling(s, z, dims)
        lam = W @ s
        WG = W @ G
        nx = G.shape[1]
        # augmented form of the scaled Newton system; unlike the normal
        # equations its conditioning is that of W G, not its square
        K = np.zeros((nx + m, nx + m))
        K[:nx, nx:] = WG.T
        K[nx:, :nx] = WG
        K[nx:, nx:] = -np.eye(m)

        def newton(ds):
            # G dx + ds_ = -rz; G^T dz = -rx; lam o (W ds_ + W^-1 dz) = ds
            q = jordan_solve(lam, ds, dims)
            # with u = W^-1 dz: W G dx - u = W (-rz - W^-1 q), (W G)^T u = -rx
            rhs_z = -rz - Winv @ q
            sol = np.linalg.solve(K, np.concatenate([-rx, W @ rhs_z]))
            dx, u = sol[:nx], sol[nx:]
            dz = W @ u
            dsv = -rz - G @ dx
            return dx, dsv, dz

        # predictor
        dx_a, ds_a, dz_a = newton(-jordan(lam, lam, dims))
        a_aff = min(1.0, max_step(s, ds_a, dims), max_step(z, dz_a, dims))
        mu = gap / deg
        sigma = ((s + a_aff * ds_a) @ (z + a_aff * dz_a) / gap) ** 3 if gap > 0 else 0.0
        sigma = min(1.0, max(0.0, sigma))
        # corrector
        corr = jordan(W @ ds_a, Winv @ dz_a, dims)
        dx, ds_, dz = newton(-jordan(lam, lam, dims) - corr + sigma * mu * e)
        a = min(1.0, 0.99 * min(max_step(s, ds_, dims), max_step(z, dz, dims)))
        if not np.isfinite(a) or a < 1e-14:
            break
        x, s, z = x + a * dx, s + a * ds_, z + a * dz
        if min_eig(s, dims) <= 0 or min_eig(z, dims) <= 0:
            break

    merit, x, s, z, it_best = best
    if merit <= max(tol, feas_tol):
        return ConeSolution(x, s, z, float(c @ x), float(-h @ z), it_best, "optimal", hist)
    pobj, dobj = float(c @ x), float(-h @ z)
    if merit <= 1e-6:
        return ConeSolution(x, s, z, pobj, dobj, it_best, "inaccurate", hist)
    raise ConvergenceError(
        f"cone solver stopped after {len(hist) - 1} iterations (merit {merit:.3e})",
        {"gap": float(s @ z), "primal_residual": hist[-1][3], "dual_residual": hist[-1][4]},
    )
