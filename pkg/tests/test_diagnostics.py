import numpy as np
import pytest

from nonlocal_bellman.controls import bellman_set, identity_set
from nonlocal_bellman.core.functions import Box, make_grid_function
from nonlocal_bellman.core.nonlinearity import Nonlinearity
from nonlocal_bellman.core.problem import Geometry
from nonlocal_bellman.diagnostics import (asymptotic_sweep, brute_force_plane_minimum,
                                          decay_threshold_probe, locate_decay_threshold,
                                          moving_planes_sweep, radial_symmetry_check,
                                          schrodinger_threshold, schrodinger_threshold_check,
                                          sliding_sweep, sqrt_quadratic_hessian_det)
from nonlocal_bellman.quadrature import reflection_mass

H = 0.05


@pytest.fixture(scope="module")
def radial():
    return make_grid_function(Box.cube(1.5), H, "gaussian", {})


def test_radial_gaussian_is_symmetric(radial):
    rep = moving_planes_sweep(radial, Geometry.ball(1.0), (1.0, 0.0))
    assert rep.monotone and rep.symmetric
    assert all(r["min_w"] >= -1e-14 for r in rep.records if r["min_w"] is not None)
    assert rep.symmetry_deviation < 1e-14


def test_shifted_gaussian_found_by_brute_force():
    u = make_grid_function(Box.cube(1.5), H, "gaussian", {"center": [0.3, 0.0]})
    dom = Geometry.ball(1.0)
    rep = moving_planes_sweep(u, dom, (-1.0, 0.0), tol=1e-12)
    assert not rep.monotone
    lambdas = [r["lambda"] for r in rep.records]
    # the sweep in direction -e1 reflects x -> -2 lam - x; brute force scans the same planes
    worst = min((r for r in rep.records if r["min_w"] is not None), key=lambda r: r["min_w"])
    u_m = u.with_values(u.values[::-1, :])
    lam, pt, w = brute_force_plane_minimum(u_m, dom, 0, lambdas)
    assert w == pytest.approx(worst["min_w"], abs=1e-12)
    assert lam == worst["lambda"]


def test_sliding_linear_is_exact():
    u = make_grid_function(Box.from_intervals([[-2, 2], [-1, 3]]), H, "linear_cap",
                           {"slope": [0.0, 1.0], "lo": -1.0, "hi": 3.0})
    dom = Geometry.strip(2.0, 1.5)
    rep = sliding_sweep(u, dom, [0.0, 0.5])
    assert rep.minima[0] == 0.0
    assert rep.minima[1] == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        sliding_sweep(u, dom, [0.33])


def test_radial_check(radial):
    rep = radial_symmetry_check(radial, domain=Geometry.ball(1.0))
    assert rep.spread < 1e-15 and rep.shell_violation == 0.0
    shifted = make_grid_function(Box.cube(1.5), H, "gaussian", {"center": [H, 0.0]})
    assert radial_symmetry_check(shifted, domain=Geometry.ball(1.0)).spread > 1e-3


def test_schrodinger_threshold():
    assert schrodinger_threshold(2) == 0.5
    assert schrodinger_threshold(3) == pytest.approx(3 ** -0.5)
    one = make_grid_function(Box.cube(2.0), 0.1, "constant", {"value": 1.0})
    rec = schrodinger_threshold_check(one, 2)
    assert rec["limsup_estimate"] == 1.0 and not rec["hypothesis_holds"]


def test_asymptotic_constant_mu():
    u = make_grid_function(Box.from_intervals([[-2, 2], [-0.5, 4.5]]), H, "constant", {"value": 1.0})
    rep = asymptotic_sweep(u, Geometry.strip(4.0, 1.5), Nonlinearity.de_giorgi(), M0=1.0)
    assert rep.applicable
    assert all(v == 1.0 for v in rep.bin_min + rep.bin_max if v is not None)
    assert rep.far_gap == 0.0 and rep.nondecreasing_beyond_M0


def test_hessian_determinant_closed_form():
    assert sqrt_quadratic_hessian_det((0.0, 0.0)) == 1.0
    assert sqrt_quadratic_hessian_det((1.0, 0.0)) == pytest.approx(2.0 ** -2)


def test_decay_threshold():
    cs = identity_set()
    far = [np.array([5.0, 0.0]), np.array([0.0, 9.0])]
    assert all(r["satisfied"] for r in decay_threshold_probe(lambda x: 0.0, far, cs, 0.5))
    assert all(r["satisfied"] for r in decay_threshold_probe(lambda x: 1.0, far, cs, 0.5))
    x = np.array([3.0, 4.0])
    K = locate_decay_threshold(x, bellman_set(), 0.5)
    expected = reflection_mass(x, (x / 5.0, 0.0), bellman_set(), 0.5) * 5.0 / 4
    assert K == pytest.approx(expected, rel=1e-9)
