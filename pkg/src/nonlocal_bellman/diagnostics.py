"""Numerical checks of qualitative properties: moving planes, sliding, radial symmetry,
Schrodinger threshold, asymptotics, the Monge-Ampere limit and decay rates.

Sweeps are restricted to lattice-exact operations: reflections across axis planes at
half-grid positions and shifts by whole cells, so no interpolation enters sign checks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controls import ControlSetSpec, build_control_set
from .core.config import ControlSet, OperatorConfig
from .core.functions import AnalyticTerm, Box, GridFunction, make_grid_function
from .core.nonlinearity import Nonlinearity, hypothesis_report
from .core.problem import Geometry
from .quadrature import QuadratureScheme, eval_Fs, eval_L_A_detail, reflection_mass


def default_tol(u: GridFunction) -> float:
    """5 h ||u||_inf: the slack granted to strict inequalities on the lattice."""
    return 5 * u.h * max(u.sup_norm(), 1e-300)


def _lattice_values(u: GridFunction, idx: np.ndarray) -> np.ndarray:
    """u at integer node indices; indices outside the box fall back to the exterior rule."""
    shape = np.array(u.shape)
    inside = np.all((idx >= 0) & (idx < shape), axis=1)
    out = np.empty(idx.shape[0])
    out[inside] = u.values[tuple(idx[inside].T)]
    if np.any(~inside):
        pts = np.asarray(u.box.lo) + idx[~inside] * u.h
        out[~inside] = u.evaluate(pts)
    return out


def _axis(direction, n: int):
    d = np.asarray(direction, dtype=float).ravel()
    if d.size != n:
        raise ValueError("direction has the wrong dimension")
    nz = np.nonzero(np.abs(d) > 1e-12)[0]
    if nz.size != 1:
        raise ValueError("only axis directions are supported")
    i = int(nz[0])
    return i, float(np.sign(d[i]))


def _linearized_c(f: Nonlinearity | None, a: float, b: float):
    """-(f(a) - f(b)) / (a - b), and 0 when a == b."""
    if f is None:
        return None
    if abs(a - b) <= 1e-12:
        return 0.0
    return float(-(f(np.array([a]))[0] - f(np.array([b]))[0]) / (a - b))


# --- moving planes -----------------------------------------------------------------------

@dataclass
class PlaneSweepReport:
    direction: list
    lambdas: list
    records: list
    tol: float
    monotone: bool
    symmetric: bool
    symmetry_deviation: float

    def to_dict(self) -> dict:
        return {"direction": self.direction, "lambdas": self.lambdas, "records": self.records,
                "tol": self.tol, "verdict": {"monotone": self.monotone, "symmetric": self.symmetric},
                "symmetry_deviation": self.symmetry_deviation}

    def table(self) -> tuple:
        cols = ["lambda", "min_w", "argmin_x", "argmin_y", "c_at_argmin", "count"]
        rows = []
        for r in self.records:
            x = r["argmin"] or [np.nan, np.nan]
            rows.append([r["lambda"], r["min_w"], x[0], x[1] if len(x) > 1 else np.nan,
                         r["c"] if r["c"] is not None else np.nan, r["count"]])
        return cols, rows


def reflection_pairs(u: GridFunction, domain: Geometry, axis: int, sign: float, lam: float):
    """Nodes x of Sigma_lambda cap Omega and index arrays of x and its reflection x^lambda.

    Sigma_lambda = {sign * x_axis < lam}.  Returns (idx, ridx, points).
    """
    k2 = 2 * lam / u.h
    if abs(k2 - round(k2)) > 1e-8:
        raise ValueError(f"lambda={lam} is not on the half-grid")
    nodes = u.nodes().reshape(-1, u.n)
    idx = np.argwhere(np.ones(u.shape, dtype=bool))
    inside = domain.contains(nodes) & (sign * nodes[:, axis] < lam - 1e-12)
    idx, pts = idx[inside], nodes[inside]
    # x^lambda_axis = 2 lam sign - x_axis  -> index shift
    lo = u.box.lo[axis]
    refl = 2 * lam * sign - pts[:, axis]
    ridx = idx.copy()
    ridx[:, axis] = np.rint((refl - lo) / u.h).astype(int)
    return idx, ridx, pts


def moving_planes_sweep(u: GridFunction, domain: Geometry, direction=(1.0, 0.0), lambdas=None,
                        f: Nonlinearity | None = None, tol: float | None = None) -> PlaneSweepReport:
    """Sweep T_lambda = {sign x_i = lambda} and record min of w_lambda = u(x^lambda) - u(x).

    Default lambdas: every half-grid position from the far end of the domain up to 0.
    Verdict: monotone when min w >= -tol for all lambda < 0; symmetric when additionally
    the lambda = 0 reflection deviation is at most tol.
    """
    axis, sign = _axis(direction, u.n)
    tol = default_tol(u) if tol is None else tol
    if lambdas is None:
        lo, hi = domain.bounding()
        far = min(sign * lo[axis], sign * hi[axis])
        k0 = int(np.ceil(2 * far / u.h))
        lambdas = [0.5 * k * u.h for k in range(k0 + 1, 1)]
    records = []
    for lam in lambdas:
        idx, ridx, pts = reflection_pairs(u, domain, axis, sign, float(lam))
        if idx.shape[0] == 0:
            records.append({"lambda": float(lam), "min_w": None, "argmin": None, "c": None, "count": 0})
            continue
        ux = u.values[tuple(idx.T)]
        ul = _lattice_values(u, ridx)
        w = ul - ux
        j = int(np.argmin(w))
        records.append({"lambda": float(lam), "min_w": float(w[j]), "argmin": pts[j].tolist(),
                        "c": _linearized_c(f, float(ul[j]), float(ux[j])), "count": int(w.size)})
    negs = [r["min_w"] for r in records if r["min_w"] is not None and r["lambda"] < 0]
    monotone = bool(all(m >= -tol for m in negs))
    dev = symmetry_deviation(u, domain, axis)
    return PlaneSweepReport(list(np.eye(u.n)[axis] * sign), [float(l) for l in lambdas], records,
                            float(tol), monotone, bool(monotone and dev <= tol), float(dev))


def symmetry_deviation(u: GridFunction, domain: Geometry, axis: int) -> float:
    """max |u(x^0) - u(x)| over Omega for the reflection x_axis -> -x_axis."""
    idx, ridx, _ = reflection_pairs(u, domain, axis, 1.0, 0.0)
    if idx.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(_lattice_values(u, ridx) - u.values[tuple(idx.T)])))


def brute_force_plane_minimum(u: GridFunction, domain: Geometry, axis: int, lambdas) -> tuple:
    """Exhaustive scan over every (lambda, node) pair; returns (lambda, point, w)."""
    best = (None, None, np.inf)
    nodes = u.nodes().reshape(-1, u.n)
    vals = u.values.reshape(-1)
    inside = domain.contains(nodes)
    for lam in lambdas:
        for p, v, ok in zip(nodes, vals, inside):
            if not ok or p[axis] >= lam - 1e-12:
                continue
            q = p.copy()
            q[axis] = 2 * lam - p[axis]
            w = float(u.evaluate(q[None])[0]) - v
            if w < best[2]:
                best = (float(lam), p.tolist(), w)
    return best


# --- sliding -----------------------------------------------------------------------------

@dataclass
class SlideReport:
    taus: list
    minima: list
    argmins: list
    tol: float
    monotone: bool
    top: float | None = None

    def to_dict(self) -> dict:
        return {"taus": self.taus, "minima": self.minima, "argmins": self.argmins,
                "tol": self.tol, "verdict": {"monotone": self.monotone}, "top": self.top}

    def table(self):
        return ["tau", "min_w", "argmin_x", "argmin_y"], [
            [t, m, *(a if a is not None else [np.nan, np.nan])] for t, m, a in
            zip(self.taus, self.minima, self.argmins)]


def sliding_sweep(u: GridFunction, domain: Geometry, taus, f: Nonlinearity | None = None,
                  tol: float | None = None, top: float | None = None) -> SlideReport:
    """min over x in Omega (x_n + tau <= top) of w^tau(x) = u(x', x_n + tau) - u(x).

    ``top`` limits the sweep to the lower part of a slab (default: the domain's top), so a
    solve on a doubled slab can be swept below its mirror plane.  Shifts must be whole
    multiples of h.
    """
    tol = default_tol(u) if tol is None else tol
    lo, hi = domain.bounding()
    top = float(hi[-1]) if top is None else float(top)
    nodes = u.nodes().reshape(-1, u.n)
    idx_all = np.argwhere(np.ones(u.shape, dtype=bool))
    inside = domain.contains(nodes) & (nodes[:, -1] < top - 1e-12)
    minima, argmins = [], []
    for tau in taus:
        k = tau / u.h
        if abs(k - round(k)) > 1e-8:
            raise ValueError(f"tau={tau} is not a multiple of h")
        if tau < 0 or tau > top - lo[-1]:
            raise ValueError(f"tau={tau} exceeds the slab")
        sel = inside & (nodes[:, -1] + tau <= top + 1e-12)
        if not np.any(sel):
            minima.append(None)
            argmins.append(None)
            continue
        idx = idx_all[sel]
        sidx = idx.copy()
        sidx[:, -1] += int(round(k))
        w = _lattice_values(u, sidx) - u.values[tuple(idx.T)]
        j = int(np.argmin(w))
        minima.append(float(w[j]))
        argmins.append(nodes[sel][j].tolist())
    positive = [m for t, m in zip(taus, minima) if t > 0 and m is not None]
    return SlideReport([float(t) for t in taus], minima, argmins, float(tol),
                       bool(all(m >= -tol for m in positive)), top)


# --- radial symmetry ---------------------------------------------------------------------

@dataclass
class RadialReport:
    spread: float
    shell_violation: float
    radii: list
    shell_means: list
    shell_spreads: list

    def to_dict(self) -> dict:
        return {"spread": self.spread, "shell_violation": self.shell_violation,
                "radii": self.radii, "shell_means": self.shell_means,
                "shell_spreads": self.shell_spreads}


def _shells(key, v):
    order = np.argsort(key, kind="stable")
    key, v = key[order], v[order]
    uniq, start = np.unique(key, return_index=True)
    counts = np.diff(np.r_[start, v.size])
    return (uniq, np.maximum.reduceat(v, start), np.minimum.reduceat(v, start),
            np.add.reduceat(v, start) / counts)


def radial_symmetry_check(u: GridFunction, center=None, domain: Geometry | None = None,
                          shell_width: float | None = None) -> RadialReport:
    """Orbit spread and radial monotonicity about ``center``.

    Orbits are the sets of nodes at exactly equal distance from the centre; the spread is
    the largest (max - min) over an orbit.  Monotonicity compares the means of
    consecutive shells of width ``shell_width`` (default h/2, radius rounded to that
    width): the violation is max(0, mean(shell k+1) - mean(shell k)).
    """
    c = np.zeros(u.n) if center is None else np.asarray(center, dtype=float)
    nodes = u.nodes().reshape(-1, u.n)
    vals = u.values.reshape(-1)
    keep = np.ones(vals.size, dtype=bool) if domain is None else domain.contains(nodes)
    k = (nodes[keep] - c) / u.h
    v = vals[keep]
    r2 = np.rint(np.sum(k * k, axis=1)).astype(np.int64)
    _, mx, mn, _ = _shells(r2, v)
    spreads = mx - mn
    width = 0.5 * u.h if shell_width is None else shell_width
    sk = np.rint(np.sqrt(r2) * u.h / width).astype(np.int64)
    skeys, smx, smn, means = _shells(sk, v)
    viol = float(max(0.0, np.max(np.diff(means)))) if means.size > 1 else 0.0
    return RadialReport(float(np.max(spreads)) if spreads.size else 0.0, viol,
                        (skeys * width).tolist(), means.tolist(), (smx - smn).tolist())


# --- Schrodinger threshold ---------------------------------------------------------------

def schrodinger_threshold(p: float) -> float:
    if p <= 1:
        raise ValueError("p must exceed 1")
    return float((1.0 / p) ** (1.0 / (p - 1)))


def schrodinger_threshold_check(u: GridFunction, p: float, radii=None, center=None,
                                domain: Geometry | None = None, planes: bool = False) -> dict:
    """sup of u outside growing radii against the threshold (1/p)^{1/(p-1)}."""
    thr = schrodinger_threshold(p)
    c = np.zeros(u.n) if center is None else np.asarray(center, dtype=float)
    nodes = u.nodes().reshape(-1, u.n)
    vals = u.values.reshape(-1)
    r = np.linalg.norm(nodes - c, axis=1)
    if radii is None:
        rmax = float(r.max())
        radii = list(np.linspace(0.25 * rmax, 0.9 * rmax, 6))
    sups = [float(np.max(vals[r >= R])) if np.any(r >= R) else None for R in radii]
    tail = [s for s in sups if s is not None]
    limsup = tail[-1] if tail else None
    rec = {"p": p, "threshold": thr, "radii": [float(R) for R in radii], "sup_outside": sups,
           "limsup_estimate": limsup,
           "hypothesis_holds": bool(limsup is not None and limsup < thr)}
    if planes:
        dom = domain if domain is not None else Geometry("box", {"lo": list(u.box.lo), "hi": list(u.box.hi)}, u.n)
        rec["planes"] = {}
        for i in range(u.n):
            d = np.zeros(u.n)
            d[i] = 1.0
            rec["planes"][f"axis{i}"] = moving_planes_sweep(u, dom, d).to_dict()["verdict"]
    return rec


# --- asymptotics -------------------------------------------------------------------------

@dataclass
class AsymptoticReport:
    bins: list
    bin_min: list
    bin_max: list
    mu: float | None
    eps0: float | None
    M0: float | None
    applicable: bool
    nondecreasing_beyond_M0: bool | None
    far_gap: float | None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def table(self):
        return ["dist_lo", "dist_hi", "u_min", "u_max"], [
            [a, b, lo, hi] for (a, b), lo, hi in zip(self.bins, self.bin_min, self.bin_max)]


def asymptotic_sweep(u: GridFunction, domain: Geometry, f: Nonlinearity, bins=None, M0=None,
                     top: float | None = None, tol: float | None = None) -> AsymptoticReport:
    """Per-bin extrema of u against the distance to the lower boundary of the slab."""
    rep = hypothesis_report(f, (0.0, 2 * (f.mu or 1.0)))
    applicable = all(rep[k].status is True for k in ("H1", "H2", "H3"))
    notes = [] if applicable else ["hypotheses not met: " + ", ".join(
        f"{k}={rep[k].status}" for k in ("H1", "H2", "H3"))]
    tol = default_tol(u) if tol is None else tol
    nodes = u.nodes().reshape(-1, u.n)
    vals = u.values.reshape(-1)
    lo, hi = domain.bounding()
    top = float(hi[-1]) if top is None else float(top)
    inside = domain.contains(nodes) & (nodes[:, -1] <= top + 1e-12)
    d = domain.boundary_distance(nodes)[inside]
    v = vals[inside]
    if bins is None:
        edges = np.linspace(0.0, float(d.max()) + 1e-9, 9)
        bins = list(zip(edges[:-1], edges[1:]))
    bmin, bmax = [], []
    for a, b in bins:
        sel = (d > a) & (d <= b)
        bmin.append(float(v[sel].min()) if np.any(sel) else None)
        bmax.append(float(v[sel].max()) if np.any(sel) else None)
    eps0 = None
    mono = None
    if M0 is not None:
        deep = d > M0
        if np.any(deep):
            # y0: deepest node; B_{M0}(y0) must lie in the domain slice
            pts = nodes[inside]
            y0 = pts[np.argmax(d)]
            ball = np.linalg.norm(pts - y0, axis=1) < M0
            eps0 = float(min(f.delta0, 0.5 * v[ball].min())) if np.any(ball) else None
        tail = [m for (a, b), m in zip(bins, bmin) if a >= M0 and m is not None]
        mono = bool(all(y >= x - tol for x, y in zip(tail, tail[1:]))) if len(tail) > 1 else None
    gap = None
    if f.mu is not None and bmin and bmin[-1] is not None:
        gap = float(f.mu - bmin[-1])
    return AsymptoticReport([[float(a), float(b)] for a, b in bins], bmin, bmax, f.mu, eps0,
                            None if M0 is None else float(M0), applicable, mono, gap, notes)


# --- Monge-Ampere limit ------------------------------------------------------------------

def sqrt_quadratic_hessian_det(x) -> float:
    """det D^2 sqrt(1 + |x|^2) = (1 + |x|^2)^{-(n+2)/2}."""
    x = np.asarray(x, dtype=float)
    return float((1 + x @ x) ** (-(x.size + 2) / 2))


def ma_limit_sweep(s_list, points, theta: float = 0.2, u_tag: str = "sqrt_quadratic",
                   n: int = 2, h: float = 0.05, half: float = 4.0, resolution=(9, 16),
                   scheme_kw: dict | None = None) -> dict:
    """r(x, s) = (1 - s) D_s u(x) / det(D^2 u(x))^{1/n} and its cross-point spread per s."""
    if u_tag != "sqrt_quadratic":
        raise ValueError("only the convex tag sqrt_quadratic has an exact Hessian here")
    u = make_grid_function(Box.cube(half, n), h, u_tag, {})
    cs = build_control_set(ControlSetSpec("monge_ampere", n, theta, 1.0, *resolution))
    rows = []
    spreads = {}
    for s in s_list:
        cfg = OperatorConfig(n=n, s=float(s), theta=theta, Theta=1.0 / theta ** (n - 1))
        scheme = QuadratureScheme(cfg, **(scheme_kw or {}))
        rs = []
        for x in points:
            val, A = eval_Fs(u, cs, x, scheme)
            r = (1 - s) * val / sqrt_quadratic_hessian_det(x) ** (1 / n)
            rs.append(r)
            rows.append({"s": float(s), "x": list(map(float, x)), "Ds": float(val), "r": float(r)})
        rs = np.array(rs)
        spreads[float(s)] = float((rs.max() - rs.min()) / abs(rs.mean()))
    s_sorted = sorted(spreads)
    return {"theta": theta, "controls": len(cs), "rows": rows, "relative_spread": spreads,
            "shrinks": bool(spreads[s_sorted[-1]] < spreads[s_sorted[0]])}


# --- decay -------------------------------------------------------------------------------

def decay_exponent_fit(controls: ControlSet, s: float, radii=None, n: int = 2, direction=None,
                       h: float = 0.05, u_tag: str = "bump", scheme_kw: dict | None = None,
                       sup_grid: int = 0) -> dict:
    """Least-squares slope of log|F_s psi(x)| against log|x| along a ray.

    Values not exceeding 10x their quadrature error bar are excluded.
    """
    radii = list(np.geomspace(3, 10, 8)) if radii is None else list(radii)
    if min(radii) < 2:
        raise ValueError("radii must be at least 2 (outside the bump support)")
    d = np.eye(n)[0] if direction is None else np.asarray(direction, float) / np.linalg.norm(direction)
    half = float(np.ceil((max(radii) + 1) / h) * h)
    u = make_grid_function(Box.cube(half, n), h, u_tag, {})
    cfg = OperatorConfig(n=n, s=s, near_radius=max(h, 0.05), far_radius=4 * half * np.sqrt(n) + 1)
    # the bump subtends an angle ~ 1/|x|: resolve it with enough directions
    kw = {"n_angle": 256, **(scheme_kw or {})}
    scheme = QuadratureScheme(cfg, **kw)
    vals, errs = [], []
    for r in radii:
        x = r * d
        best = None
        for A in controls:
            e = eval_L_A_detail(u, A, x, scheme)
            if best is None or e.value < best.value:
                best = e
        vals.append(best.value)
        errs.append(best.error_bar)
    vals, errs, rr = np.array(vals), np.array(errs), np.array(radii)
    ok = np.abs(vals) > 10 * errs
    slope = np.nan
    if ok.sum() >= 2:
        slope = float(np.polyfit(np.log(rr[ok]), np.log(np.abs(vals[ok])), 1)[0])
    out = {"s": s, "n": n, "radii": rr.tolist(), "values": vals.tolist(), "errors": errs.tolist(),
           "used": ok.tolist(), "slope": slope, "expected": -(n + 2 * s)}
    if sup_grid:
        pts = [np.array(p) for p in np.stack(np.meshgrid(*[np.linspace(-2, 2, sup_grid)] * n,
                                                          indexing="ij"), -1).reshape(-1, n)]
        out["sup_abs"] = float(max(abs(eval_Fs(u, controls, p, scheme)[0]) for p in pts))
    return out


def decay_threshold_probe(c_field, x_points, controls: ControlSet, s: float, plane_offset: float = 0.0):
    """Compare |x|^{2s} c(x) with -reflection_mass(x) |x|^{2s} / 4 point by point.

    The reflection plane for x passes through ``plane_offset`` along x/|x| (normal x/|x|),
    so the surrogate threshold depends only on the direction of x.
    """
    pts = [np.asarray(p, dtype=float) for p in x_points]
    if callable(c_field):
        cvals = [float(c_field(p)) for p in pts]
    else:
        cvals = [float(v) for v in c_field]
    out = []
    for p, c in zip(pts, cvals):
        r = float(np.linalg.norm(p))
        nu = p / r
        rm = reflection_mass(p, (nu, plane_offset), controls, s)
        thr = -rm * r ** (2 * s) / 4
        lhs = r ** (2 * s) * c
        out.append({"x": p.tolist(), "c": c, "scaled_c": lhs, "threshold": thr,
                    "margin": lhs - thr, "satisfied": bool(lhs > thr)})
    return out


def locate_decay_threshold(x, controls: ControlSet, s: float, lo: float = 0.0, hi: float = 100.0,
                           iters: int = 60) -> float:
    """Bisection in K for c(x) = -K |x|^{-2s}: the K where the classification flips."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x)

    def ok(K):
        return decay_threshold_probe([-K * r ** (-2 * s)], [x], controls, s)[0]["satisfied"]

    if not ok(lo) or ok(hi):
        raise ValueError("threshold not bracketed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return 0.5 * (lo + hi)
