"""Operator configuration and admissible control matrices."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gamma

SUPPORTED_DIMS = (2, 3)


def fractional_laplacian_constant(n: int, s: float) -> float:
    """Standard normalization C_{n,s} = s 4^s Gamma(n/2+s) / (pi^{n/2} Gamma(1-s)).

    With this constant the symbol of (-Delta)^s is |xi|^{2s}.
    """
    return s * 4.0**s * gamma(n / 2 + s) / (np.pi ** (n / 2) * gamma(1 - s))


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere in R^n."""
    return 2 * np.pi ** (n / 2) / gamma(n / 2)


@dataclass(frozen=True)
class OperatorConfig:
    n: int = 2
    s: float = 0.5
    theta: float = 0.5
    Theta: float = 2.0
    c_ns: float | None = None
    near_radius: float = 0.1
    far_radius: float = 40.0

    def __post_init__(self):
        if self.n not in SUPPORTED_DIMS:
            raise ValueError(f"dimension n={self.n} unsupported (expected one of {SUPPORTED_DIMS})")
        if not 0 < self.s < 1:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not 0 < self.theta <= self.Theta:
            raise ValueError(f"need 0 < theta <= Theta, got theta={self.theta}, Theta={self.Theta}")
        if self.near_radius <= 0:
            raise ValueError("near_radius must be positive")
        if self.far_radius <= self.near_radius:
            raise ValueError("far_radius must exceed near_radius")
        if self.c_ns is None:
            object.__setattr__(self, "c_ns", fractional_laplacian_constant(self.n, self.s))
        if not self.c_ns > 0:
            raise ValueError("c_ns must be positive")

    def with_(self, **changes) -> "OperatorConfig":
        if "s" in changes or "n" in changes:
            changes.setdefault("c_ns", None)
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "s": self.s, "theta": self.theta, "Theta": self.Theta,
            "c_ns": self.c_ns, "near_radius": self.near_radius, "far_radius": self.far_radius,
        }


@dataclass(frozen=True, eq=False)
class ControlMatrix:
    """Symmetric positive-definite matrix A entering the kernel |A^{-1} y|^{-(n+2s)}."""

    entries: np.ndarray
    lambda_min: float = field(init=False)
    lambda_max: float = field(init=False)
    det: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("control matrix must be square")
        if not np.allclose(a, a.T, atol=1e-12, rtol=0):
            raise ValueError("control matrix must be symmetric")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        eig = np.linalg.eigvalsh(a)
        if eig[0] <= 0:
            raise ValueError("control matrix must be positive definite")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "lambda_min", float(eig[0]))
        object.__setattr__(self, "lambda_max", float(eig[-1]))
        object.__setattr__(self, "det", float(np.prod(eig)))

    @classmethod
    def identity(cls, n: int) -> "ControlMatrix":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)

    def is_bellman_admissible(self, theta: float, Theta: float, tol: float = 1e-10) -> bool:
        return self.lambda_min >= theta - tol and self.lambda_max <= Theta + tol

    def is_monge_ampere_admissible(self, theta: float, tol: float = 1e-10) -> bool:
        n = self.n
        return (abs(self.det - 1.0) <= tol and self.lambda_min >= theta - tol
                and self.lambda_max <= theta ** (1 - n) + tol)

    def close_to(self, other: "ControlMatrix", tol: float = 1e-10) -> bool:
        return np.max(np.abs(self.entries - other.entries)) <= tol

    def __eq__(self, other):
        return isinstance(other, ControlMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"ControlMatrix({self.entries.tolist()})"


CONTROL_KINDS = ("bellman_box", "monge_ampere", "singleton_identity")


@dataclass(frozen=True)
class ControlSet:
    members: tuple
    kind: str
    resolution: tuple = (1, 1)
    theta: float = 1.0
    Theta: float = 1.0
    spec: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in CONTROL_KINDS:
            raise ValueError(f"unknown control-set kind {self.kind!r}")
        if len(self.members) == 0:
            raise ValueError("control set must be nonempty")
        object.__setattr__(self, "members", tuple(self.members))
        for m in self.members:
            if not self._admissible(m):
                raise ValueError(f"member {m!r} is not admissible for kind {self.kind}")

    def _admissible(self, m: ControlMatrix) -> bool:
        if self.kind == "monge_ampere":
            return m.is_monge_ampere_admissible(self.theta, tol=1e-9)
        if self.kind == "singleton_identity":
            return m.close_to(ControlMatrix.identity(m.n))
        return m.is_bellman_admissible(self.theta, self.Theta, tol=1e-9)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @property
    def n(self) -> int:
        return self.members[0].n

    def contains(self, A: ControlMatrix, tol: float = 1e-10) -> bool:
        return any(m.close_to(A, tol) for m in self.members)

    def stacked(self) -> np.ndarray:
        """Members as an array of shape (k, n, n)."""
        return np.stack([m.entries for m in self.members])

    def to_json(self) -> list:
        return [m.entries.tolist() for m in self.members]

    @classmethod
    def from_json(cls, data, kind: str = "bellman_box", theta: float | None = None,
                  Theta: float | None = None) -> "ControlSet":
        members = tuple(ControlMatrix(np.asarray(a, dtype=float)) for a in data)
        if theta is None:
            theta = min(m.lambda_min for m in members)
        if Theta is None:
            Theta = max(m.lambda_max for m in members)
        return cls(members, kind, (len(members), 1), theta, Theta)
