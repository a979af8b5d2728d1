"""Analytic test functions, exterior rules and lattice-sampled grid functions.

Every operator in the package acts on a :class:`GridFunction`: lattice samples on an
axis-aligned box, multilinear interpolation inside the box and an
:class:`ExteriorRule` outside it.  Exterior rules are restricted to a closed list of
analytic tags so that the far-field part of every nonlocal integral has a known
closed form (or a certified bound).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.ndimage import map_coordinates, spline_filter

from .config import sphere_area

TAGS = ("constant", "gaussian", "bump", "sqrt_quadratic", "linear_cap")


class UnsupportedTagError(ValueError):
    pass


class MissingTailError(ValueError):
    """The exterior rule has no far-field formula for the requested evaluation."""


def _as_points(x, n=None) -> np.ndarray:
    p = np.atleast_2d(np.asarray(x, dtype=float))
    if n is not None and p.shape[-1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {p.shape}")
    return p


def _center(params, n):
    c = params.get("center")
    return np.zeros(n) if c is None else np.asarray(c, dtype=float)


def bump_profile(r2: np.ndarray) -> np.ndarray:
    """exp(r^2 / (r^2 - 1)) on r < 1, extended by 0 (its continuous limit)."""
    out = np.zeros_like(r2, dtype=float)
    inside = r2 < 1.0
    q = r2[inside]
    out[inside] = np.exp(q / (q - 1.0))
    return out


@dataclass(frozen=True)
class AnalyticTerm:
    """One closed-form summand ``tag(params)``.

    Parameters by tag:

    * constant: ``value``
    * gaussian: ``amp * exp(-|x - center|^2 / width^2)``
    * bump: ``amp * psi((x - center) / radius)`` with psi the standard C-infinity bump
    * sqrt_quadratic: ``amp * sqrt(1 + |x - center|^2)``
    * linear_cap: ``clip(offset + slope . x, lo, hi)``
    """

    tag: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise UnsupportedTagError(f"unsupported tag {self.tag!r}; expected one of {TAGS}")
        if self.tag == "linear_cap" and "slope" not in self.params:
            raise ValueError("linear_cap needs an explicit slope vector")

    def _p(self, key, default):
        return self.params.get(key, default)

    def __call__(self, x) -> np.ndarray:
        p = _as_points(x)
        n = p.shape[1]
        tag = self.tag
        if tag == "constant":
            return np.full(p.shape[0], float(self._p("value", 1.0)))
        if tag == "linear_cap":
            slope = np.asarray(self.params["slope"], dtype=float)
            v = float(self._p("offset", 0.0)) + p @ slope
            return np.clip(v, float(self._p("lo", -np.inf)), float(self._p("hi", np.inf)))
        d = p - _center(self.params, n)
        r2 = np.einsum("ij,ij->i", d, d)
        amp = float(self._p("amp", 1.0))
        if tag == "gaussian":
            return amp * np.exp(-r2 / float(self._p("width", 1.0)) ** 2)
        if tag == "bump":
            return amp * bump_profile(r2 / float(self._p("radius", 1.0)) ** 2)
        return amp * np.sqrt(1.0 + r2)  # sqrt_quadratic

    def shifted(self, a) -> "AnalyticTerm":
        a = np.asarray(a, dtype=float)
        params = dict(self.params)
        if self.tag == "linear_cap":
            slope = np.asarray(params["slope"], dtype=float)
            params["offset"] = float(params.get("offset", 0.0)) - float(slope @ a)
        elif self.tag != "constant":
            params["center"] = (_center(params, a.size) + a).tolist()
        return AnalyticTerm(self.tag, params)

    def scaled(self, k: float) -> "AnalyticTerm":
        params = dict(self.params)
        if self.tag == "constant":
            params["value"] = k * float(params.get("value", 1.0))
        elif self.tag == "linear_cap":
            lo, hi = float(params.get("lo", -np.inf)), float(params.get("hi", np.inf))
            params["offset"] = k * float(params.get("offset", 0.0))
            params["slope"] = (k * np.asarray(params["slope"], dtype=float)).tolist()
            lo, hi = k * lo, k * hi
            params["lo"], params["hi"] = (min(lo, hi), max(lo, hi))
        else:
            params["amp"] = k * float(params.get("amp", 1.0))
        return AnalyticTerm(self.tag, params)

    # --- growth / decay information -------------------------------------------------

    def radial_majorant(self, r: float, n: int) -> float:
        """Upper bound of |term| on the sphere |x| = r."""
        tag = self.tag
        if tag == "constant":
            return abs(float(self._p("value", 1.0)))
        if tag == "linear_cap":
            lo, hi = float(self._p("lo", -np.inf)), float(self._p("hi", np.inf))
            if np.isfinite(lo) and np.isfinite(hi):
                return max(abs(lo), abs(hi))
            slope = np.asarray(self.params["slope"], dtype=float)
            return abs(float(self._p("offset", 0.0))) + np.linalg.norm(slope) * r
        c = np.linalg.norm(_center(self.params, n))
        amp = abs(float(self._p("amp", 1.0)))
        if tag == "gaussian":
            return amp * np.exp(-max(r - c, 0.0) ** 2 / float(self._p("width", 1.0)) ** 2)
        if tag == "bump":
            return amp if r <= c + float(self._p("radius", 1.0)) else 0.0
        return amp * (1.0 + r + c)

    def growth_exponent(self, n: int) -> float:
        """Polynomial growth rate at infinity (0 for bounded terms)."""
        if self.tag == "sqrt_quadratic":
            return 1.0
        if self.tag == "linear_cap":
            lo, hi = float(self._p("lo", -np.inf)), float(self._p("hi", np.inf))
            slope = np.asarray(self.params["slope"], dtype=float)
            if np.any(slope != 0) and not (np.isfinite(lo) and np.isfinite(hi)):
                return 1.0
        return 0.0

    def to_dict(self) -> dict:
        return {"tag": self.tag, "params": _jsonable(self.params)}


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, float) and not np.isfinite(v):
            v = "inf" if v > 0 else "-inf"
        out[k] = v
    return out


def _unjson(params: dict) -> dict:
    return {k: (float(v) if v in ("inf", "-inf") else v) for k, v in params.items()}


# ----------------------------------------------------------------------------------
# Far-field tails.  Each returns (value, error_bound) of
#     1/2 det(A) int_{|z| > R} (u(x + A z) + u(x - A z)) |z|^{-(n+2s)} dz
# ----------------------------------------------------------------------------------

def _sphere_rule(n: int, m: int = 256):
    """Directions and weights of a product quadrature on S^{n-1} (weights sum to |S|)."""
    if n == 2:
        t = (np.arange(m) + 0.5) * 2 * np.pi / m
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(m, 2 * np.pi / m)
    k = max(m // 4, 16)
    ct, wt = np.polynomial.legendre.leggauss(k)
    phi = (np.arange(2 * k) + 0.5) * np.pi / k
    C, P = np.meshgrid(ct, phi, indexing="ij")
    S = np.sqrt(1 - C**2)
    dirs = np.column_stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), C.ravel()])
    w = (wt[:, None] * np.full(2 * k, np.pi / k)[None, :]).ravel()
    return dirs, w


def term_tail(term: AnalyticTerm, x: np.ndarray, A: np.ndarray, R: float, s: float):
    n = x.size
    detA = float(np.linalg.det(A))
    lam_min = float(np.linalg.eigvalsh(A)[0])
    S = sphere_area(n)
    mass = detA * S * R ** (-2 * s) / (2 * s)  # det A * int_{|z|>R} |z|^{-n-2s}
    tag = term.tag
    if tag == "constant":
        return float(term.params.get("value", 1.0)) * mass, 0.0
    if tag == "gaussian":
        c = _center(term.params, n)
        gap = max(lam_min * R - np.linalg.norm(x - c), 0.0)
        amp = abs(float(term.params.get("amp", 1.0)))
        return 0.0, amp * np.exp(-gap**2 / float(term.params.get("width", 1.0)) ** 2) * mass
    if tag == "bump":
        c = _center(term.params, n)
        amp = abs(float(term.params.get("amp", 1.0)))
        if lam_min * R > np.linalg.norm(x - c) + float(term.params.get("radius", 1.0)):
            return 0.0, 0.0
        return 0.0, amp * mass
    if tag == "linear_cap":
        lo = float(term.params.get("lo", -np.inf))
        hi = float(term.params.get("hi", np.inf))
        slope = np.asarray(term.params["slope"], dtype=float)
        if not np.any(slope):
            return float(np.clip(term.params.get("offset", 0.0), lo, hi)) * mass, 0.0
        if np.isinf(lo) and np.isinf(hi):
            return float(term(x[None])[0]) * mass, 0.0
        if np.isfinite(lo) and np.isfinite(hi):
            K = abs(float(term.params.get("offset", 0.0)) + slope @ x) + max(abs(lo), abs(hi))
            err = abs(hi - lo) * detA * S * K / np.linalg.norm(A @ slope) * R ** (-1 - 2 * s) / (1 + 2 * s)
            return 0.5 * (lo + hi) * mass, err
        raise MissingTailError("linear_cap with a single cap has no far-field formula")
    # sqrt_quadratic
    if s <= 0.5:
        raise MissingTailError("sqrt_quadratic grows linearly: nonlocal integral diverges for s <= 1/2")
    amp = float(term.params.get("amp", 1.0))
    a = x - _center(term.params, n)
    dirs, w = _sphere_rule(n, 512)
    Aw = dirs @ A
    nrm = np.linalg.norm(Aw, axis=1)
    lead = np.sum(w * nrm) * R ** (1 - 2 * s) / (2 * s - 1)
    g = (a @ a + 1.0 - ((Aw @ a) / nrm) ** 2) / (2 * nrm)
    second = np.sum(w * g) * R ** (-1 - 2 * s) / (1 + 2 * s)
    err = abs(amp) * detA * S * (np.linalg.norm(a) + 1) ** 4 / (lam_min * R) ** 3 * R ** (-2 * s)
    return amp * detA * (lead + second), err


# ----------------------------------------------------------------------------------
# Exterior rules
# ----------------------------------------------------------------------------------

EXTERIOR_KINDS = ("constant", "zero", "analytic", "reflect_plane")


@dataclass(frozen=True)
class ExteriorRule:
    """How a grid function continues outside its sampling box.

    ``analytic`` rules carry a tuple of :class:`AnalyticTerm` (their sum is the
    continuation).  ``reflect_plane`` mirrors the point across ``plane = (axis, position)``
    and falls back to ``base`` when the mirrored point is still outside the box.
    """

    kind: str
    value: float = 0.0
    terms: tuple = ()
    plane: tuple | None = None
    base: "ExteriorRule | None" = None

    def __post_init__(self):
        if self.kind not in EXTERIOR_KINDS:
            raise ValueError(f"unknown exterior kind {self.kind!r}")
        if self.kind == "reflect_plane" and (self.plane is None or self.base is None):
            raise ValueError("reflect_plane needs a plane and a base rule")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, c: float):
        return cls("constant", value=float(c))

    @classmethod
    def analytic(cls, *terms: AnalyticTerm):
        return cls("analytic", terms=tuple(terms))

    def evaluate(self, points) -> np.ndarray:
        p = _as_points(points)
        if self.kind == "zero":
            return np.zeros(p.shape[0])
        if self.kind == "constant":
            return np.full(p.shape[0], self.value)
        if self.kind == "analytic":
            out = np.zeros(p.shape[0])
            for t in self.terms:
                out += t(p)
            return out
        return self.base.evaluate(p)

    def far_value(self) -> float:
        """Constant value the rule tends to at infinity (needed by lattice assembly)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.value
        if self.kind == "reflect_plane":
            return self.base.far_value()
        total = 0.0
        for t in self.terms:
            if t.tag == "constant":
                total += float(t.params.get("value", 1.0))
            elif t.tag in ("sqrt_quadratic", "linear_cap"):
                raise MissingTailError(f"tag {t.tag} has no constant far value")
        return total

    def tail(self, x, A, R, s):
        """Far-field integral beyond |A^{-1} y| = R and its error bound."""
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "constant":
            return term_tail(AnalyticTerm("constant", {"value": self.value}), x, A, R, s)
        if self.kind == "reflect_plane":
            return self.base.tail(x, A, R, s)
        val = err = 0.0
        for t in self.terms:
            v, e = term_tail(t, x, A, R, s)
            val += v
            err += e
        return val, err

    def shifted(self, a):
        if self.kind == "analytic":
            return ExteriorRule.analytic(*(t.shifted(a) for t in self.terms))
        if self.kind == "reflect_plane":
            axis, pos = self.plane
            return ExteriorRule("reflect_plane", plane=(axis, pos + float(np.asarray(a)[axis])),
                                base=self.base.shifted(a))
        return self

    def scaled(self, k: float):
        if self.kind == "constant":
            return ExteriorRule.constant(k * self.value)
        if self.kind == "analytic":
            return ExteriorRule.analytic(*(t.scaled(k) for t in self.terms))
        if self.kind == "reflect_plane":
            return ExteriorRule("reflect_plane", plane=self.plane, base=self.base.scaled(k))
        return self

    def __add__(self, other: "ExteriorRule") -> "ExteriorRule":
        def as_terms(r):
            if r.kind == "zero":
                return ()
            if r.kind == "constant":
                return (AnalyticTerm("constant", {"value": r.value}),)
            if r.kind == "analytic":
                return r.terms
            raise ValueError("reflect_plane rules cannot be added")
        if self.kind == "zero":
            return other
        if other.kind == "zero":
            return self
        if self.kind == "constant" and other.kind == "constant":
            return ExteriorRule.constant(self.value + other.value)
        return ExteriorRule.analytic(*as_terms(self), *as_terms(other))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "analytic":
            d["terms"] = [t.to_dict() for t in self.terms]
        elif self.kind == "reflect_plane":
            d["plane"] = list(self.plane)
            d["base"] = self.base.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExteriorRule":
        kind = d["kind"]
        if kind == "zero":
            return cls.zero()
        if kind == "constant":
            return cls.constant(d["value"])
        if kind == "analytic":
            return cls.analytic(*(AnalyticTerm(t["tag"], _unjson(t.get("params", {})))
                                  for t in d["terms"]))
        if kind == "reflect_plane":
            return cls("reflect_plane", plane=(int(d["plane"][0]), float(d["plane"][1])),
                       base=cls.from_dict(d["base"]))
        raise ValueError(f"unknown exterior kind {kind!r}")


# ----------------------------------------------------------------------------------
# Grid functions
# ----------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, intervals) -> "Box":
        if isinstance(intervals, Box):
            return intervals
        iv = [tuple(i) for i in intervals]
        return cls(tuple(a for a, _ in iv), tuple(b for _, b in iv))

    @classmethod
    def cube(cls, half: float, n: int = 2, center=None) -> "Box":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - half), tuple(c + half))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def shape(self, h: float) -> tuple:
        out = []
        for a, b in zip(self.lo, self.hi):
            k = (b - a) / h
            if abs(k - round(k)) > 1e-9 * max(1.0, k):
                raise ValueError(f"grid spacing h={h} does not divide box edge [{a}, {b}]")
            out.append(int(round(k)) + 1)
        return tuple(out)

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        p = _as_points(points)
        lo = np.asarray(self.lo) + margin
        hi = np.asarray(self.hi) - margin
        return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=1)

    def to_list(self) -> list:
        return [[a, b] for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True, eq=False)
class GridFunction:
    box: Box
    h: float
    values: np.ndarray
    exterior: ExteriorRule

    def __post_init__(self):
        shape = self.box.shape(self.h)
        v = np.array(self.values, dtype=float)
        if v.shape != shape:
            raise ValueError(f"values shape {v.shape} does not match grid shape {shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.box.n

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def axes(self) -> list:
        return [np.linspace(a, b, m) for a, b, m in zip(self.box.lo, self.box.hi, self.shape)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``values.shape + (n,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def node_index(self, x) -> tuple:
        k = (np.asarray(x, dtype=float) - np.asarray(self.box.lo)) / self.h
        return tuple(int(round(v)) for v in k)

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def evaluate(self, x) -> np.ndarray:
        p = _as_points(x, self.n)
        out = np.empty(p.shape[0])
        inside = self.box.contains(p)
        if np.any(inside):
            out[inside] = self._interp(p[inside])
        outside = ~inside
        if np.any(outside):
            q = p[outside]
            if self.exterior.kind == "reflect_plane":
                axis, pos = self.exterior.plane
                q = q.copy()
                q[:, axis] = 2 * pos - q[:, axis]
                back = self.box.contains(q)
                vals = np.empty(q.shape[0])
                if np.any(back):
                    vals[back] = self._interp(q[back])
                if np.any(~back):
                    vals[~back] = self.exterior.base.evaluate(p[outside][~back])
                out[outside] = vals
            else:
                out[outside] = self.exterior.evaluate(q)
        return out

    @cached_property
    def _coeffs(self) -> np.ndarray:
        # cubic B-spline coefficients; interpolation stays linear in the node values
        return spline_filter(self.values, order=3, mode="nearest")

    def _interp(self, p: np.ndarray) -> np.ndarray:
        coords = (p - np.asarray(self.box.lo)) / self.h
        return map_coordinates(self._coeffs, coords.T, order=3, mode="nearest", prefilter=False)

    # --- algebra -----------------------------------------------------------------

    def _check_compatible(self, other: "GridFunction"):
        if (other.box.lo != self.box.lo or other.box.hi != self.box.hi
                or abs(other.h - self.h) > 1e-15):
            raise ValueError("grid functions live on different lattices")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check_compatible(other)
        return GridFunction(self.box, self.h, self.values + other.values,
                            self.exterior + other.exterior)

    def __mul__(self, k: float) -> "GridFunction":
        return GridFunction(self.box, self.h, k * self.values, self.exterior.scaled(k))

    __rmul__ = __mul__

    def translated(self, a) -> "GridFunction":
        """The function x -> u(x - a); box and exterior move with it."""
        a = np.asarray(a, dtype=float)
        box = Box(tuple(np.asarray(self.box.lo) + a), tuple(np.asarray(self.box.hi) + a))
        return GridFunction(box, self.h, self.values, self.exterior.shifted(a))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.box, self.h, values, self.exterior)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path, value_name: str = "value") -> None:
        """Write long-format CSV: node index per axis, coordinates, value."""
        nodes = self.nodes().reshape(-1, self.n)
        idx = np.indices(self.shape).reshape(self.n, -1).T
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{k}" for k in range(self.n)]
                       + [f"x{k} [length]" for k in range(self.n)] + [value_name])
            for ii, xx, v in zip(idx, nodes, self.values.ravel()):
                w.writerow([*ii.tolist(), *(f"{c:.12g}" for c in xx), f"{v:.17g}"])


def make_grid_function(box, h: float, expression_tag: str | None = None, params: dict | None = None,
                       *, terms=None) -> GridFunction:
    """Sample a closed-form expression on the lattice and attach the matching exterior.

    Either ``expression_tag``/``params`` or a list of :class:`AnalyticTerm` (summed) is given.
    """
    box = Box.from_intervals(box)
    if terms is None:
        if expression_tag is None:
            raise ValueError("need an expression tag or a list of terms")
        terms = [AnalyticTerm(expression_tag, dict(params or {}))]
    terms = tuple(terms)
    exterior = ExteriorRule.analytic(*terms)
    shape = box.shape(h)
    axes = [np.linspace(a, b, m) for a, b, m in zip(box.lo, box.hi, shape)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.n)
    values = exterior.evaluate(pts).reshape(shape)
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite sample produced by expression")
    if len(terms) == 1 and terms[0].tag == "constant":
        exterior = ExteriorRule.constant(float(terms[0].params.get("value", 1.0)))
    return GridFunction(box, h, values, exterior)


def check_Ls_membership(gf: GridFunction, s: float):
    """Decide whether the exterior continuation lies in the weighted space L_s.

    Returns ``(member, bound)`` where ``bound`` majorizes the exterior part of
    int |u| / (1 + |x|^{n+2s}) dx (``inf`` when the tag grows too fast).
    """
    n = gf.n
    rule = gf.exterior
    while rule.kind == "reflect_plane":
        rule = rule.base
    if rule.kind == "zero":
        return True, 0.0
    if rule.kind == "constant":
        terms = (AnalyticTerm("constant", {"value": rule.value}),)
    else:
        terms = rule.terms
    if any(t.growth_exponent(n) >= 2 * s for t in terms):
        return False, float("inf")
    r0 = 0.5 * min(np.subtract(gf.box.hi, gf.box.lo))
    r0 = max(r0 - np.linalg.norm(0.5 * (np.asarray(gf.box.lo) + np.asarray(gf.box.hi))), 0.0)
    S = sphere_area(n)

    def integrand(r):
        return S * r ** (n - 1) * sum(t.radial_majorant(r, n) for t in terms) / (1 + r ** (n + 2 * s))

    bound, _ = integrate.quad(integrand, r0, np.inf, limit=200)
    return bool(np.isfinite(bound)), float(bound)
