"""Nonlinearities f(u) (and f(u, grad u)) for -F_s u = f and their structural hypotheses."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("power", "exponential", "de_giorgi", "schrodinger_power", "gradient_weighted", "constant")


@dataclass(frozen=True)
class Nonlinearity:
    """A reaction term.

    ``power``: max(t,0)^p; ``exponential``: exp(kappa t); ``de_giorgi``: t - t^3;
    ``schrodinger_power``: t^p - t (the reaction of -F u + u = u^p);
    ``gradient_weighted``: base(t) (1 + |grad u|^2)^(sigma/2); ``constant``: c.

    ``mu`` is the positive zero used by the asymptotic hypotheses; ``c0``, ``delta0`` and
    ``delta1`` are the constants of the lower-bound and monotonicity hypotheses.
    """

    kind: str
    p: float = 2.0
    kappa: float = 0.0
    sigma: float = 0.0
    c: float = 1.0
    base: "Nonlinearity | None" = None
    mu: float | None = None
    c0: float = 0.5
    delta0: float = 0.5
    delta1: float = 0.25
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power" and self.p < 1:
            raise ValueError("power nonlinearity needs p >= 1")
        if self.kind == "schrodinger_power" and self.p <= 1:
            raise ValueError("schrodinger_power needs p > 1")
        if self.kind == "gradient_weighted" and self.base is None:
            raise ValueError("gradient_weighted needs a base nonlinearity")
        if self.mu is None and self.kind in ("de_giorgi", "schrodinger_power"):
            object.__setattr__(self, "mu", 1.0)

    # convenience constructors
    @classmethod
    def power(cls, p, **kw):
        return cls("power", p=p, **kw)

    @classmethod
    def exponential(cls, kappa, **kw):
        return cls("exponential", kappa=kappa, **kw)

    @classmethod
    def de_giorgi(cls, **kw):
        return cls("de_giorgi", **kw)

    @classmethod
    def constant(cls, c, **kw):
        return cls("constant", c=c, **kw)

    def __call__(self, t, grad=None) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "power":
            return np.maximum(t, 0.0) ** self.p
        if k == "exponential":
            return np.exp(self.kappa * t)
        if k == "de_giorgi":
            return t - t**3
        if k == "schrodinger_power":
            return np.maximum(t, 0.0) ** self.p - t
        if k == "constant":
            return np.full_like(t, self.c)
        weight = 1.0
        if grad is not None:
            g = np.asarray(grad, dtype=float)
            weight = (1.0 + np.sum(g**2, axis=-1)) ** (self.sigma / 2)
        return self.base(t) * weight

    def lipschitz(self, lo: float, hi: float, samples: int = 2001) -> float:
        """Lipschitz constant of t -> f(t) on [lo, hi] (gradient weight excluded)."""
        if hi <= lo:
            hi = lo + 1e-12
        t = np.linspace(lo, hi, samples)
        f = self.base(t) if self.kind == "gradient_weighted" else self(t)
        slopes = np.abs(np.diff(f)) / np.diff(t)
        return float(np.max(slopes)) if slopes.size else 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "p": self.p, "kappa": self.kappa, "sigma": self.sigma, "c": self.c,
             "mu": self.mu, "c0": self.c0, "delta0": self.delta0, "delta1": self.delta1}
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Nonlinearity":
        d = dict(d)
        if "base" in d and d["base"] is not None:
            d["base"] = cls.from_dict(d["base"])
        allowed = {"kind", "p", "kappa", "sigma", "c", "base", "mu", "c0", "delta0", "delta1"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown nonlinearity fields {sorted(unknown)}")
        return cls(**d)


@dataclass
class HypothesisCheck:
    status: bool | None  # None: not applicable
    witness: float | None = None
    note: str = ""


def hypothesis_report(f: Nonlinearity, t_range=(0.0, 2.0), samples: int = 4001) -> dict:
    """Check the positivity (H1), linear lower bound (H2) and monotonicity (H3) hypotheses.

    Each check runs on a dense sample; failures carry a witness point t.
    """
    lo, hi = t_range
    if not hi > lo:
        raise ValueError("empty range")
    g = f.base if f.kind == "gradient_weighted" else f
    out = {}

    mu = f.mu
    if mu is None or mu <= 0:
        out["H1"] = HypothesisCheck(None, note="no positive zero mu declared")
        out["H3"] = HypothesisCheck(None, note="no positive zero mu declared")
    else:
        t = np.linspace(0.0, mu, samples)[1:-1]
        bad = t[g(t) <= 0]
        if bad.size:
            out["H1"] = HypothesisCheck(False, float(bad[0]), "f <= 0 inside (0, mu)")
        elif abs(float(g(np.array([mu]))[0])) > 1e-12:
            out["H1"] = HypothesisCheck(False, float(mu), "f(mu) != 0")
        else:
            above = np.linspace(mu, max(hi, mu), samples)
            bad = above[g(above) > 1e-12]
            out["H1"] = (HypothesisCheck(False, float(bad[0]), "f > 0 beyond mu") if bad.size
                         else HypothesisCheck(True))
        t = np.linspace(mu - f.delta1, mu, samples)[1:]
        d = np.diff(g(t))
        bad = t[1:][d > 1e-14]
        out["H3"] = (HypothesisCheck(False, float(bad[0]), "f increases near mu") if bad.size
                     else HypothesisCheck(True))

    t = np.linspace(0.0, f.delta0, samples)
    viol = g(t) < f.c0 * t - 1e-14
    if np.any(viol):
        out["H2"] = HypothesisCheck(False, float(t[viol][0]), "f(t) < c0 t")
    else:
        out["H2"] = HypothesisCheck(True)
    return out
