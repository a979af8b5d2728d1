import numpy as np

from nonlocal_bellman.controls import (ControlSetSpec, bellman_set, build_control_set, identity_set,
                                       is_subsequence, monge_ampere_set, reflection_closed, refine)


def test_degenerate_sets_are_identity():
    for spec in (ControlSetSpec("bellman_box", 2, 1.0, 1.0), ControlSetSpec("monge_ampere", 2, 1.0, 1.0)):
        cs = build_control_set(spec)
        assert len(cs) == 1
        assert np.allclose(cs[0].entries, np.eye(2))
    assert len(identity_set()) == 1


def test_bellman_set_admissible_and_contains_identity():
    cs = bellman_set(0.5, 2.0)
    assert len(cs) == 27
    assert all(A.is_bellman_admissible(0.5, 2.0) for A in cs)
    assert any(np.allclose(A.entries, np.eye(2)) for A in cs)
    assert reflection_closed(cs, 0) and reflection_closed(cs, 1)


def test_monge_ampere_members_have_unit_determinant():
    cs = monge_ampere_set(0.2)
    assert all(abs(A.det - 1) < 1e-10 for A in cs)
    assert all(np.linalg.eigvalsh(A.entries)[0] >= 0.2 - 1e-10 for A in cs)


def test_refine_nests():
    cs0 = bellman_set(0.5, 2.0)
    cs1 = refine(cs0)
    cs2 = refine(cs1)
    assert [len(cs0), len(cs1), len(cs2)] == [27, 165, 1161]
    assert is_subsequence(cs0, cs1) and is_subsequence(cs1, cs2)
    assert not is_subsequence(cs1, cs0)


def test_three_dimensional_set():
    cs = bellman_set(0.5, 2.0, n=3, eig_resolution=2, angle_resolution=2)
    assert cs.n == 3
    assert all(A.is_bellman_admissible(0.5, 2.0) for A in cs)
