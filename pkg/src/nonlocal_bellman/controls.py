"""Finite control sets discretizing the admissible matrix families."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .core.config import ControlMatrix, ControlSet


@dataclass(frozen=True)
class ControlSetSpec:
    kind: str = "bellman_box"
    n: int = 2
    theta: float = 0.5
    Theta: float = 2.0
    eig_resolution: int = 3
    angle_resolution: int = 4

    def __post_init__(self):
        if self.kind not in ("bellman_box", "monge_ampere", "singleton_identity"):
            raise ValueError(f"unknown control-set kind {self.kind!r}")
        if self.n not in (2, 3):
            raise ValueError("control sets are built for n in {2, 3}")
        if self.eig_resolution < 2 or self.angle_resolution < 1:
            raise ValueError("need eig_resolution >= 2 and angle_resolution >= 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.kind == "bellman_box" and self.theta > self.Theta:
            raise ValueError(f"theta={self.theta} exceeds Theta={self.Theta}")
        if self.kind == "monge_ampere" and self.theta > 1:
            raise ValueError("Monge-Ampere set is empty for theta > 1")

    def to_dict(self) -> dict:
        return dict(kind=self.kind, n=self.n, theta=self.theta, Theta=self.Theta,
                    eig_resolution=self.eig_resolution, angle_resolution=self.angle_resolution)


def _geometric_grid(lo: float, hi: float, k: int) -> np.ndarray:
    if np.isclose(lo, hi):
        return np.array([lo])
    g = np.geomspace(lo, hi, k)
    g[0], g[-1] = lo, hi
    return g


def _rot2(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def _givens(n: int, i: int, j: int, phi: float) -> np.ndarray:
    G = np.eye(n)
    c, s = np.cos(phi), np.sin(phi)
    G[i, i] = G[j, j] = c
    G[i, j], G[j, i] = -s, s
    return G


def _rotations(n: int, angles: np.ndarray):
    if n == 2:
        for phi in angles:
            yield _rot2(phi)
        return
    for a, b, c in itertools.product(angles, repeat=3):
        yield _givens(3, 0, 1, a) @ _givens(3, 0, 2, b) @ _givens(3, 1, 2, c)


def _dedupe(mats, tol=1e-12):
    out = []
    for M in mats:
        if not any(np.max(np.abs(M - O)) <= tol for O in out):
            out.append(M)
    return out


def build_control_set(spec: ControlSetSpec) -> ControlSet:
    """Enumerate admissible matrices R diag(eigs) R^T on nested grids.

    Eigenvalue grids are geometric with both endpoints; rotation angles are
    k * period / angle_resolution (period pi/2 for the box, pi for Monge-Ampere),
    which makes the family closed under the reflection x_1 -> -x_1.
    """
    n = spec.n
    I = np.eye(n)
    if spec.kind == "singleton_identity":
        return ControlSet((ControlMatrix(I),), "singleton_identity", (1, 1), 1.0, 1.0, spec)

    mats = []
    if spec.kind == "bellman_box":
        eigs = _geometric_grid(spec.theta, spec.Theta, spec.eig_resolution)
        if spec.theta <= 1 <= spec.Theta:
            mats.append(I)
        angles = np.arange(spec.angle_resolution) * (np.pi / 2) / spec.angle_resolution
        diagonals = list(itertools.product(eigs, repeat=n))
        theta, Theta = spec.theta, spec.Theta
    else:
        mats.append(I)
        angles = np.arange(spec.angle_resolution) * np.pi / spec.angle_resolution
        if n == 2:
            a = _geometric_grid(spec.theta, 1.0, spec.eig_resolution)
            diagonals = [(x, 1.0 / x) for x in a]
        else:
            a = _geometric_grid(spec.theta, spec.theta ** -2, 2 * spec.eig_resolution - 1)
            diagonals = [(x, y, 1.0 / (x * y)) for x in a for y in a
                         if 1.0 / (x * y) >= spec.theta * (1 - 1e-12)]
        theta, Theta = spec.theta, spec.theta ** (1 - n)
    for R in _rotations(n, angles):
        for d in diagonals:
            M = R @ np.diag(d) @ R.T
            mats.append(0.5 * (M + M.T))
    members = tuple(ControlMatrix(M) for M in _dedupe(mats))
    return ControlSet(members, spec.kind, (spec.eig_resolution, spec.angle_resolution),
                      theta, Theta, spec)


def refine(cs: ControlSet) -> ControlSet:
    """Halve both grid steps; the result contains ``cs`` as a subsequence."""
    spec = cs.spec
    if spec is None:
        raise ValueError("control set was not built from a spec")
    if spec.kind == "singleton_identity":
        return cs
    finer = replace(spec, eig_resolution=2 * spec.eig_resolution - 1,
                    angle_resolution=2 * spec.angle_resolution)
    return build_control_set(finer)


def bellman_set(theta=0.5, Theta=2.0, n=2, eig_resolution=3, angle_resolution=4) -> ControlSet:
    return build_control_set(ControlSetSpec("bellman_box", n, theta, Theta,
                                            eig_resolution, angle_resolution))


def monge_ampere_set(theta=0.2, n=2, eig_resolution=5, angle_resolution=8) -> ControlSet:
    return build_control_set(ControlSetSpec("monge_ampere", n, theta, 1.0,
                                            eig_resolution, angle_resolution))


def identity_set(n=2) -> ControlSet:
    return build_control_set(ControlSetSpec("singleton_identity", n, 1.0, 1.0))


def is_subsequence(small: ControlSet, big: ControlSet, tol: float = 1e-10) -> bool:
    it = iter(big.members)
    return all(any(m.close_to(b, tol) for b in it) for m in small.members)


def reflection_closed(cs: ControlSet, axis: int = 0, tol: float = 1e-9) -> bool:
    P = np.eye(cs.n)
    P[axis, axis] = -1
    return all(cs.contains(ControlMatrix(P @ m.entries @ P), tol) for m in cs.members)
