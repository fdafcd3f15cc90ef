import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdlssd.errors import ConvergenceError
from hdlssd.optimizers.socp import (
    ConeDims, identity, jordan, jordan_solve, max_step, min_eig, nt_scaling, solve_socp,
)


def random_interior(rng, dims):
    u = rng.normal(size=dims.size)
    u[: dims.linear] = np.abs(u[: dims.linear]) + 0.1
    for sl in dims.soc_slices():
        u[sl.start] = np.linalg.norm(u[sl.start + 1: sl.stop]) + rng.uniform(0.1, 2.0)
    return u


DIMS = ConeDims(linear=3, soc=(3, 4, 2))


def test_identity_is_jordan_unit(rng):
    u = rng.normal(size=DIMS.size)
    assert np.allclose(jordan(identity(DIMS), u, DIMS), u)
    assert min_eig(identity(DIMS), DIMS) == 1.0


def test_jordan_solve_inverts_product(rng):
    lam = random_interior(rng, DIMS)
    x = rng.normal(size=DIMS.size)
    assert np.allclose(jordan_solve(lam, jordan(lam, x, DIMS), DIMS), x, rtol=0, atol=1e-10)


def test_nt_scaling_maps_s_and_z_to_same_point(rng):
    for _ in range(20):
        s, z = random_interior(rng, DIMS), random_interior(rng, DIMS)
        W, Winv = nt_scaling(s, z, DIMS)
        assert np.allclose(W @ Winv, np.eye(DIMS.size), rtol=0, atol=1e-9)
        assert np.allclose(W @ s, Winv @ z, rtol=0, atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_max_step_reaches_boundary(seed):
    rng = np.random.default_rng(seed)
    u = random_interior(rng, DIMS)
    du = rng.normal(size=DIMS.size) * 3
    a = max_step(u, du, DIMS)
    if np.isfinite(a):
        assert min_eig(u + 0.999 * a * du, DIMS) > -1e-9
        assert min_eig(u + a * du, DIMS) == pytest.approx(0.0, abs=1e-7 * (1 + np.abs(u).max()))
    else:
        assert min_eig(u + 1e6 * du, DIMS) > 0


def test_norm_minimization_known_optimum():
    # minimize t subject to ||x - p|| <= t, x on the line x1 + x2 = 2 written as
    # two inequalities; optimum is the distance from p = (3, 3) to the line
    p = np.array([3.0, 3.0])
    # variables (t, x1, x2); s = h - G v
    G = np.array([
        [0.0, 1.0, 1.0],    # x1 + x2 <= 2
        [0.0, -1.0, -1.0],  # x1 + x2 >= 2
        [-1.0, 0.0, 0.0],   # (t, x - p) in the cone
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ])
    h = np.array([2.0, -2.0, 0.0, -p[0], -p[1]])
    sol = solve_socp(np.array([1.0, 0.0, 0.0]), G, h, ConeDims(linear=2, soc=(3,)))
    assert sol.status in ("optimal", "inaccurate")
    assert sol.primal == pytest.approx(4 / np.sqrt(2), abs=1e-6)
    assert np.allclose(sol.x[1:], [1.0, 1.0], rtol=0, atol=1e-5)


def test_hyperbolic_constraint():
    # minimize a + b subject to a b >= 1, i.e. (a + b, a - b, 2) in the cone
    G = np.array([[-1.0, -1.0], [-1.0, 1.0], [0.0, 0.0]])
    h = np.array([0.0, 0.0, 2.0])
    sol = solve_socp(np.array([1.0, 1.0]), G, h, ConeDims(soc=(3,)))
    assert sol.primal == pytest.approx(2.0, abs=1e-8)
    assert np.allclose(sol.x, [1.0, 1.0], rtol=0, atol=1e-5)
    assert abs(sol.primal - sol.dual) <= 1e-8


def test_random_lps_match_reference():
    linprog = pytest.importorskip("scipy.optimize").linprog
    rng = np.random.default_rng(11)
    for _ in range(15):
        nx, m = 4, 9
        G = rng.normal(size=(m, nx))
        x0 = rng.normal(size=nx)
        h = G @ x0 + rng.uniform(0.1, 1.0, size=m)
        # bounded: dual-feasible c = -G^T z with z > 0
        c = -G.T @ rng.uniform(0.1, 1.0, size=m)
        ref = linprog(c, A_ub=G, b_ub=h, bounds=[(None, None)] * nx, method="highs")
        assert ref.status == 0
        sol = solve_socp(c, G, h, ConeDims(linear=m))
        assert sol.primal == pytest.approx(ref.fun, abs=1e-6 * max(1, abs(ref.fun)))
        # weak duality and complementary slackness
        assert sol.primal - sol.dual >= -1e-8
        assert abs(sol.s @ sol.z) <= 1e-7


def test_infeasible_raises():
    # x <= -1 and -x <= -1 (x >= 1)
    G = np.array([[1.0], [-1.0]])
    h = np.array([-1.0, -1.0])
    with pytest.raises(ConvergenceError):
        solve_socp(np.array([1.0]), G, h, ConeDims(linear=2))


def test_iteration_cap_raises():
    G = np.array([[-1.0, -1.0], [-1.0, 1.0], [0.0, 0.0]])
    h = np.array([0.0, 0.0, 2.0])
    with pytest.raises(ConvergenceError) as info:
        solve_socp(np.array([1.0, 1.0]), G, h, ConeDims(soc=(3,)), max_iter=1)
    assert "gap" in info.value.residuals
