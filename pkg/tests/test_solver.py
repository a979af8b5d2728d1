import numpy as np
import pytest
from scipy.special import gamma

from nonlocal_bellman.controls import bellman_set, identity_set
from nonlocal_bellman.core.config import ControlMatrix, OperatorConfig, fractional_laplacian_constant
from nonlocal_bellman.core.functions import AnalyticTerm, Box, ExteriorRule, make_grid_function
from nonlocal_bellman.core.nonlinearity import Nonlinearity
from nonlocal_bellman.core.problem import Geometry, ProblemSpec
from nonlocal_bellman.quadrature import QuadratureScheme, eval_L_A_detail
from nonlocal_bellman.solver import (LatticeSystem, MonotonicityError, cube_mass_outside,
                                     cube_second_moment, dense_eigenvalue, eigenpair_ball,
                                     estimate_M0, lattice_kernel, near_stencil, solve_dirichlet)

A_SKEW = np.array([[1.6, 0.5], [0.5, 0.7]])


def test_cube_formulas_against_direct_sums():
    # midpoint sum of the kernel moment over the cube
    A = A_SKEW
    s, a = 0.5, 1.5
    Ainv = np.linalg.inv(A)
    N = 1200
    d = 2 * a / N
    t = -a + (np.arange(N) + 0.5) * d  # cell midpoints; the origin is a cell corner
    Y = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    z = Y @ Ainv.T
    k = np.sum(z * z, 1) ** (-(2 + 2 * s) / 2)
    M = np.einsum("i,ij,ik->jk", k, Y, Y) * d * d
    assert np.allclose(cube_second_moment(A, s, a), M, rtol=2e-3)
    # the mass outside the cube scales like a^{-2s}
    assert cube_mass_outside(A, s, 2 * a) == pytest.approx(cube_mass_outside(A, s, a) / 2, rel=1e-12)


def test_nine_point_stencil_is_not_monotone_and_monotone_one_is():
    M = cube_second_moment(A_SKEW, 0.5, 1.5)
    dirs, w = near_stencil(M, 1, "nine_point")
    assert w.min() < 0
    dirs, w = near_stencil(M, 3, "monotone")
    assert w.min() >= 0
    recon = sum(a * np.outer(v, v) for v, a in zip(dirs, w))
    assert np.allclose(recon, 0.5 * M, atol=1e-12)


def test_nine_point_rejected_by_check():
    with pytest.raises(MonotonicityError):
        lattice_kernel(ControlMatrix(A_SKEW), 0.5, 10, 1, scheme="nine_point", check_monotone=True)


def test_mirrored_controls_give_mirrored_stencils():
    B = A_SKEW * np.array([[1, -1], [-1, 1]])
    k1 = lattice_kernel(ControlMatrix(A_SKEW), 0.5, 8, 2)
    k2 = lattice_kernel(ControlMatrix(B), 0.5, 8, 2)
    assert np.allclose(k1.weights[::-1, :], k2.weights, atol=1e-14)


@pytest.fixture(scope="module")
def ball_system():
    return LatticeSystem.build(Geometry.ball(1.0), OperatorConfig(), bellman_set(), 0.05,
                               ExteriorRule.constant(0.0))


def test_row_sums_and_signs(ball_system):
    for op in ball_system.operators:
        c = op.check()
        assert c["monotone"]
        assert c["max_abs_row_sum"] <= 1e-9 * abs(c["diagonal"])


def test_constants_annihilated(ball_system):
    N = ball_system.n_unknowns
    vals = ball_system.apply_all(np.ones(N), exterior=False)
    # with the exterior at 1 as well, every row vanishes
    sys1 = LatticeSystem.build(Geometry.ball(1.0), OperatorConfig(), bellman_set(), 0.05,
                               ExteriorRule.constant(1.0))
    full = sys1.apply_all(np.ones(N))
    assert np.max(np.abs(full)) <= 1e-9 * np.max(np.abs(vals))


def test_dense_matches_fft(ball_system):
    N = ball_system.n_unknowns
    rng = np.random.default_rng(1)
    u = rng.standard_normal(N)
    pol = rng.integers(0, len(ball_system.controls), N)
    M = ball_system.dense(pol)
    assert np.allclose(M @ u, ball_system.apply_policy(u, pol, exterior=False), atol=1e-9)


def test_lattice_matches_quadrature_on_gaussian():
    h = 1 / 40
    geom = Geometry.ball(1.0)
    rule = ExteriorRule.analytic(AnalyticTerm("gaussian", {}))
    sysg = LatticeSystem.build(geom, OperatorConfig(), identity_set(), h, rule)
    pts = sysg.interior_nodes()
    u = np.exp(-np.sum(pts ** 2, 1))
    Lu = sysg.apply_all(u)[0]
    g = make_grid_function(Box.cube(4.0), 0.025, "gaussian", {})
    sch = QuadratureScheme(OperatorConfig())
    for j in (0, len(pts) // 3, len(pts) // 2):
        ref = eval_L_A_detail(g, np.eye(2), pts[j], sch).value
        assert Lu[j] == pytest.approx(ref, rel=5e-3)


def test_torsion_function_matches_closed_form():
    # (-Delta)^s u = 1 in B_1: u(0) = Gamma(n/2) / (2^{2s} Gamma(1+s) Gamma(n/2+s))
    s, n = 0.5, 2
    c = fractional_laplacian_constant(n, s)
    p = ProblemSpec(Geometry.ball(1.0), OperatorConfig(), identity_set(), Nonlinearity.constant(1.0),
                    ExteriorRule.zero(), 1 / 40)
    u, rep = solve_dirichlet(p, tol=1e-10)
    assert rep.converged
    exact = gamma(n / 2) / (2 ** (2 * s) * gamma(1 + s) * gamma(n / 2 + s)) * c
    assert u.values[u.node_index((0.0, 0.0))] == pytest.approx(exact, rel=0.03)


def test_liouville_constant_exterior():
    p = ProblemSpec(Geometry.ball(1.0), OperatorConfig(), bellman_set(), Nonlinearity.constant(0.0),
                    ExteriorRule.constant(0.7), 0.1)
    u, rep = solve_dirichlet(p, tol=1e-10)
    assert rep.converged
    assert np.max(np.abs(u.values - 0.7)) < 1e-10


def test_nonlinear_solve_and_report():
    p = ProblemSpec(Geometry.ball(1.0), OperatorConfig(), bellman_set(), Nonlinearity.de_giorgi(),
                    ExteriorRule.zero(), 0.1)
    u, rep = solve_dirichlet(p, tol=1e-9)
    d = rep.to_dict()
    assert rep.converged and d["converged"]
    assert "seconds" not in d
    assert np.all(u.values >= -1e-12)


def test_nonconvergence_is_reported_not_raised():
    p = ProblemSpec(Geometry.ball(1.0), OperatorConfig(), bellman_set(), Nonlinearity.exponential(1.0),
                    ExteriorRule.zero(), 0.1)
    u, rep = solve_dirichlet(p, tol=1e-14, max_iter=1, max_policy=1)
    assert not rep.converged
    assert len(rep.residual_history) >= 1


def test_eigenpair_and_dense_oracle():
    ep = eigenpair_ball(1.0, OperatorConfig(), identity_set(), h=0.1, tol=1e-10)
    assert ep.converged and ep.lambda1 > 0
    assert ep.lambda1 == pytest.approx(dense_eigenvalue(ep.system), rel=1e-8)
    interior = ep.psi.values[ep.system.interior]
    assert interior.min() > 0 and interior.max() == pytest.approx(1.0)


def test_estimate_M0():
    f = Nonlinearity.de_giorgi()
    assert estimate_M0(f, f.c0, s=0.5) == pytest.approx(1.0)
    assert estimate_M0(f, 4 * f.c0, s=0.5) == pytest.approx(4.0)
