"""Domain geometries and Dirichlet problem specifications (with JSON round-trip)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import OperatorConfig, ControlSet
from .functions import Box, ExteriorRule, _as_points
from .nonlinearity import Nonlinearity

GEOMETRY_KINDS = ("ball", "box", "strip", "epigraph", "cylinder")


class ValidationError(ValueError):
    """A problem/config document failed validation; message names the offending field."""


@dataclass(frozen=True)
class Geometry:
    """Open domain Omega.

    * ball: ``R``, ``center``
    * box: ``lo``, ``hi``
    * strip: ``height`` (0 < x_n < height), ``half_width`` (|x_i| < half_width, i < n)
    * epigraph: ``phi_knots``/``phi_values`` (piecewise-linear graph in x_1),
      truncated to ``phi(x_1) < x_n < top`` and |x_i| < ``half_width``
    * cylinder: ``radius`` in x', ``height`` in x_n
    """

    kind: str
    params: dict = field(default_factory=dict)
    n: int = 2

    def __post_init__(self):
        if self.kind not in GEOMETRY_KINDS:
            raise ValidationError(f"geometry.kind: unknown kind {self.kind!r}")
        required = {"ball": ("R",), "box": ("lo", "hi"), "strip": ("height", "half_width"),
                    "epigraph": ("phi_knots", "phi_values", "top", "half_width"),
                    "cylinder": ("radius", "height")}[self.kind]
        for k in required:
            if k not in self.params:
                raise ValidationError(f"geometry.{k}: missing for kind {self.kind}")

    @classmethod
    def ball(cls, R=1.0, center=None, n=2):
        p = {"R": float(R)}
        if center is not None:
            p["center"] = list(map(float, center))
        return cls("ball", p, n)

    @classmethod
    def strip(cls, height, half_width, n=2):
        return cls("strip", {"height": float(height), "half_width": float(half_width)}, n)

    def phi(self, x1) -> np.ndarray:
        return np.interp(x1, self.params["phi_knots"], self.params["phi_values"])

    def contains(self, points) -> np.ndarray:
        p = _as_points(points, self.n)
        P = self.params
        if self.kind == "ball":
            c = np.asarray(P.get("center", np.zeros(self.n)), dtype=float)
            return np.sum((p - c) ** 2, axis=1) < P["R"] ** 2 - 1e-12
        if self.kind == "box":
            return np.all((p > np.asarray(P["lo"]) + 1e-12) & (p < np.asarray(P["hi"]) - 1e-12), axis=1)
        xn = p[:, -1]
        lateral = p[:, :-1]
        if self.kind == "strip":
            return ((xn > 1e-12) & (xn < P["height"] - 1e-12)
                    & np.all(np.abs(lateral) < P["half_width"] - 1e-12, axis=1))
        if self.kind == "epigraph":
            return ((xn > self.phi(p[:, 0]) + 1e-12) & (xn < P["top"] - 1e-12)
                    & np.all(np.abs(lateral) < P["half_width"] - 1e-12, axis=1))
        return ((xn > 1e-12) & (xn < P["height"] - 1e-12)
                & (np.sum(lateral**2, axis=1) < P["radius"] ** 2 - 1e-12))

    def bounding(self):
        P = self.params
        n = self.n
        if self.kind == "ball":
            c = np.asarray(P.get("center", np.zeros(n)), dtype=float)
            return c - P["R"], c + P["R"]
        if self.kind == "box":
            return np.asarray(P["lo"], float), np.asarray(P["hi"], float)
        if self.kind == "strip":
            w = P["half_width"]
            return np.r_[np.full(n - 1, -w), 0.0], np.r_[np.full(n - 1, w), P["height"]]
        if self.kind == "epigraph":
            w = P["half_width"]
            return (np.r_[np.full(n - 1, -w), min(P["phi_values"])],
                    np.r_[np.full(n - 1, w), P["top"]])
        r = P["radius"]
        return np.r_[np.full(n - 1, -r), 0.0], np.r_[np.full(n - 1, r), P["height"]]

    def boundary_distance(self, points) -> np.ndarray:
        """Vertical distance x_n - phi(x') to the lower boundary (strip / epigraph / cylinder)."""
        p = _as_points(points, self.n)
        if self.kind == "epigraph":
            return p[:, -1] - self.phi(p[:, 0])
        if self.kind in ("strip", "cylinder"):
            return p[:, -1]
        raise ValueError(f"boundary distance undefined for {self.kind}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        d = dict(d)
        kind = d.pop("kind", None)
        n = int(d.pop("n", 2))
        return cls(kind, d, n)


def lattice_box(geometry: Geometry, h: float, margin: float | None = None) -> Box:
    """Smallest lattice box (nodes at integer multiples of h) containing the domain plus margin."""
    margin = 2 * h if margin is None else max(margin, 2 * h)
    lo, hi = geometry.bounding()
    klo = np.floor((lo - margin) / h + 1e-9)
    khi = np.ceil((hi + margin) / h - 1e-9)
    return Box(tuple(klo * h), tuple(khi * h))


@dataclass(frozen=True)
class ProblemSpec:
    geometry: Geometry
    config: OperatorConfig
    controls: ControlSet
    f: Nonlinearity
    exterior_data: ExteriorRule = field(default_factory=ExteriorRule.zero)
    h: float = 0.05
    margin: float | None = None

    def __post_init__(self):
        if self.geometry.n != self.config.n or self.controls.n != self.config.n:
            raise ValidationError("dimension mismatch between geometry, config and controls")
        if self.h <= 0:
            raise ValidationError("h: must be positive")

    def box(self) -> Box:
        return lattice_box(self.geometry, self.h, self.margin)

    def to_dict(self) -> dict:
        cs = self.controls
        controls = cs.spec.to_dict() if cs.spec is not None else {"matrices": cs.to_json()}
        return {"geometry": self.geometry.to_dict(), "config": self.config.to_dict(),
                "controls": controls, "f": self.f.to_dict(),
                "exterior": self.exterior_data.to_dict(), "h": self.h, "margin": self.margin}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        from ..controls import ControlSetSpec, build_control_set

        def section(name):
            if name not in d:
                raise ValidationError(f"{name}: missing section")
            return d[name]

        try:
            cfg = OperatorConfig(**section("config"))
        except (TypeError, ValueError) as e:
            raise ValidationError(f"config: {e}") from None
        try:
            geom = Geometry.from_dict({"n": cfg.n, **section("geometry")})
        except ValidationError:
            raise
        except (TypeError, ValueError) as e:
            raise ValidationError(f"geometry: {e}") from None
        c = dict(d.get("controls", {"kind": "singleton_identity"}))
        try:
            if "matrices" in c:
                controls = ControlSet.from_json(c["matrices"])
            else:
                c.setdefault("n", cfg.n)
                controls = build_control_set(ControlSetSpec(**c))
        except (TypeError, ValueError) as e:
            raise ValidationError(f"controls: {e}") from None
        try:
            f = Nonlinearity.from_dict(d.get("f", {"kind": "constant", "c": 0.0}))
        except (TypeError, ValueError) as e:
            raise ValidationError(f"f: {e}") from None
        try:
            ext = ExteriorRule.from_dict(d.get("exterior", {"kind": "zero"}))
        except (TypeError, ValueError, KeyError) as e:
            raise ValidationError(f"exterior: {e}") from None
        h = d.get("h", 0.05)
        if not isinstance(h, (int, float)) or h <= 0:
            raise ValidationError(f"h: expected a positive number, got {h!r}")
        return cls(geom, cfg, controls, f, ext, float(h), d.get("margin"))

    @classmethod
    def from_json(cls, text: str) -> "ProblemSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(d, dict):
            raise ValidationError("top level: expected a JSON object")
        return cls.from_dict(d)
