import json

import numpy as np
import pytest

from nonlocal_bellman.core.config import ControlMatrix, OperatorConfig, fractional_laplacian_constant
from nonlocal_bellman.core.functions import (AnalyticTerm, Box, ExteriorRule, UnsupportedTagError,
                                             check_Ls_membership, make_grid_function)
from nonlocal_bellman.core.nonlinearity import Nonlinearity, hypothesis_report
from nonlocal_bellman.core.problem import Geometry, ProblemSpec, ValidationError


def test_constant_closed_form():
    # n=2, s=1/2: C = Gamma(3/2) / (pi^{3/2}) = 1/(2 pi)
    assert fractional_laplacian_constant(2, 0.5) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert OperatorConfig().c_ns == pytest.approx(1 / (2 * np.pi))


@pytest.mark.parametrize("kw", [{"s": 0.0}, {"s": 1.0}, {"n": 4}, {"theta": 3.0}, {"near_radius": 50.0}])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        OperatorConfig(**kw)


def test_with_s_recomputes_constant():
    cfg = OperatorConfig().with_(s=0.3)
    assert cfg.c_ns == pytest.approx(fractional_laplacian_constant(2, 0.3))


def test_control_matrix_validation():
    with pytest.raises(ValueError):
        ControlMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    A = ControlMatrix(np.diag([0.5, 2.0]))
    assert A.is_bellman_admissible(0.5, 2.0)
    assert A.is_monge_ampere_admissible(0.5)
    assert not A.is_bellman_admissible(0.6, 2.0)


def test_grid_function_constant():
    u = make_grid_function(Box.cube(2.0), 0.1, "constant", {"value": 1.0})
    assert np.all(u.values == 1.0)
    assert u.exterior.kind == "constant"
    assert u.evaluate(np.array([[10.0, -7.0]]))[0] == 1.0


def test_grid_function_bump_and_gaussian():
    b = make_grid_function(Box.cube(2.0), 0.1, "bump", {})
    assert b.values[b.node_index((0.0, 0.0))] == pytest.approx(1.0)
    assert b.values[b.node_index((1.5, 0.0))] == 0.0
    assert abs(b.evaluate(np.array([[1.5, 0.0]]))[0]) < 1e-15
    g = make_grid_function(Box.cube(4.0), 0.1, "gaussian", {})
    assert g.values[g.node_index((1.0, 0.0))] == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_interpolation_is_accurate_and_uses_exterior():
    g = make_grid_function(Box.cube(4.0), 0.05, "gaussian", {})
    x = np.array([[0.123, -0.377], [5.0, 0.0]])
    exact = np.exp(-np.sum(x ** 2, axis=1))
    assert np.allclose(g.evaluate(x), exact, rtol=1e-4, atol=1e-12)


def test_unsupported_tag():
    with pytest.raises(UnsupportedTagError):
        AnalyticTerm("cosine", {})


def test_Ls_membership():
    box = Box.cube(2.0)
    assert check_Ls_membership(make_grid_function(box, 0.1, "constant", {"value": 2.0}), 0.5)[0]
    assert check_Ls_membership(make_grid_function(box, 0.1, "gaussian", {}), 0.5)[0]
    lin = make_grid_function(box, 0.1, "linear_cap", {"slope": [1.0, 0.0]})
    assert check_Ls_membership(lin, 0.75)[0]
    assert not check_Ls_membership(lin, 0.25)[0]


def test_hypotheses():
    r = hypothesis_report(Nonlinearity.de_giorgi())
    assert r["H1"].status and r["H2"].status and r["H3"].status
    r = hypothesis_report(Nonlinearity.power(2))
    assert r["H1"].status is None and r["H2"].status is False


def test_problem_json_errors():
    with pytest.raises(ValidationError, match="line 1"):
        ProblemSpec.from_json('{"geometry": ')
    d = {"geometry": {"kind": "ball", "R": 1.0}, "config": {"s": 1.5}}
    with pytest.raises(ValidationError, match="config"):
        ProblemSpec.from_dict(d)
    d = {"geometry": {"kind": "ball"}, "config": {}}
    with pytest.raises(ValidationError, match="geometry.R"):
        ProblemSpec.from_dict(d)


def test_problem_roundtrip():
    d = {"geometry": {"kind": "ball", "R": 1.0}, "config": {"s": 0.5},
         "controls": {"kind": "bellman_box"}, "f": {"kind": "constant", "c": 1.0}, "h": 0.1}
    p = ProblemSpec.from_dict(d)
    q = ProblemSpec.from_json(p.to_json())
    assert q.to_dict() == p.to_dict()
    assert len(q.controls) == len(p.controls)


def test_geometry_contains():
    g = Geometry.ball(1.0)
    assert list(g.contains(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]]))) == [True, False, True]
    st = Geometry.strip(2.0, 3.0)
    assert list(st.contains(np.array([[0.0, 1.0], [0.0, 0.0], [3.5, 1.0]]))) == [True, False, False]


def test_csv_header(tmp_path):
    u = make_grid_function(Box.cube(1.0), 0.5, "constant", {"value": 1.0})
    u.to_csv(tmp_path / "u.csv", "u [1]")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "i0,i1,x0 [length],x1 [length],u [1]"
    assert len(lines) == 1 + 25


def test_exterior_rule_roundtrip():
    rule = ExteriorRule.analytic(AnalyticTerm("gaussian", {"amp": 0.5, "center": [1.0, 0.0]}))
    again = ExteriorRule.from_dict(json.loads(json.dumps(rule.to_dict())))
    pts = np.array([[0.3, 0.1], [2.0, -1.0]])
    assert np.array_equal(rule.evaluate(pts), again.evaluate(pts))
