"""Pointwise evaluation of L_A u, F_s u, D_s u and (-Delta)^s u on grid functions.

All integrals use the symmetric second-difference form

    L_A u(x) = 1/2 int (u(x+y) + u(x-y) - 2u(x)) / |A^{-1} y|^{n+2s} dy
             = 1/2 det(A) int (u(x+Az) + u(x-Az) - 2u(x)) / |z|^{n+2s} dz,

evaluated in the whitened variable z = A^{-1} y and split into three zones:

* near  |z| < rho:  quadratic Taylor model 1/2 z^T (A H A) z integrated exactly
  (H from a central-difference Hessian), rho = near_radius / lambda_max(A);
* mid   rho <= |z| <= R: product rule, Gauss-Legendre panels in log r times a
  uniform rule on the half sphere;
* far   |z| > R: closed-form tail of the exterior rule, R = far_radius / lambda_min(A),
  so every far point lies outside the sampling box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controls import ControlSetSpec, build_control_set
from .core.config import ControlMatrix, ControlSet, OperatorConfig, sphere_area
from .core.functions import GridFunction
from scipy.special import gamma


@dataclass(frozen=True)
class QuadratureScheme:
    config: OperatorConfig = field(default_factory=OperatorConfig)
    n_angle: int = 96
    n_panels: int = 40
    order: int = 8
    check_far: bool = True

    def __post_init__(self):
        if self.n_angle < 4 or self.n_panels < 1 or self.order < 2:
            raise ValueError("quadrature resolution too small")

    @property
    def near_radius(self) -> float:
        return self.config.near_radius

    @property
    def far_radius(self) -> float:
        return self.config.far_radius

    @property
    def s(self) -> float:
        return self.config.s

    @property
    def n(self) -> int:
        return self.config.n

    def with_(self, **changes) -> "QuadratureScheme":
        cfg_keys = {"n", "s", "theta", "Theta", "c_ns", "near_radius", "far_radius"}
        cfg_changes = {k: changes.pop(k) for k in list(changes) if k in cfg_keys}
        cfg = self.config.with_(**cfg_changes) if cfg_changes else self.config
        return QuadratureScheme(cfg, **{**dict(n_angle=self.n_angle, n_panels=self.n_panels,
                                                order=self.order, check_far=self.check_far),
                                        **changes})

    def half_sphere(self):
        """Directions and weights covering half of S^{n-1} (weights sum to |S|/2)."""
        m = self.n_angle
        if self.n == 2:
            t = (np.arange(m) + 0.5) * np.pi / m
            return np.column_stack([np.cos(t), np.sin(t)]), np.full(m, np.pi / m)
        k = max(m // 4, 8)
        c, wc = np.polynomial.legendre.leggauss(k)
        c = 0.5 * (c + 1.0)
        wc = 0.5 * wc
        phi = (np.arange(2 * k) + 0.5) * np.pi / k
        C, P = np.meshgrid(c, phi, indexing="ij")
        S = np.sqrt(1 - C**2)
        dirs = np.column_stack([(S * np.cos(P)).ravel(), (S * np.sin(P)).ravel(), C.ravel()])
        w = (wc[:, None] * np.full(2 * k, np.pi / k)[None, :]).ravel()
        return dirs, w

    def radial_rule(self, r0: float, r1: float, panels: int | None = None):
        """Nodes r and weights for int_{r0}^{r1} g(r) dr/r (Gauss panels in log r)."""
        panels = self.n_panels if panels is None else panels
        x, w = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(np.log(r0), np.log(r1), panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wt = (half[:, None] * w[None, :]).ravel()
        return np.exp(t), wt


@dataclass
class Evaluation:
    value: float
    near: float
    mid: float
    far: float
    near_error: float
    far_error: float
    mid_error: float = 0.0

    @property
    def error_bar(self) -> float:
        return self.near_error + self.mid_error + self.far_error

    def to_dict(self) -> dict:
        return {"value": self.value, "near": self.near, "mid": self.mid, "far": self.far,
                "near_error": self.near_error, "far_error": self.far_error,
                "mid_error": self.mid_error,
                "error_bar": self.error_bar}


def hessian(u: GridFunction, x: np.ndarray, step: float | None = None) -> np.ndarray:
    """Central-difference Hessian (5 points per axis pair) with step equal to the grid spacing."""
    n = u.n
    h = u.h if step is None else step
    E = np.eye(n) * h
    pts = [x]
    for i in range(n):
        pts += [x + E[i], x - E[i]]
    for i in range(n):
        for j in range(i + 1, n):
            pts += [x + E[i] + E[j], x + E[i] - E[j], x - E[i] + E[j], x - E[i] - E[j]]
    v = u.evaluate(np.array(pts))
    H = np.empty((n, n))
    k = 1
    for i in range(n):
        H[i, i] = (v[k] + v[k + 1] - 2 * v[0]) / h**2
        k += 2
    for i in range(n):
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (v[k] - v[k + 1] - v[k + 2] + v[k + 3]) / (4 * h**2)
            k += 4
    return H


def _check_point(u: GridFunction, x: np.ndarray, scheme: QuadratureScheme):
    if x.shape != (u.n,):
        raise ValueError(f"point must have shape ({u.n},)")
    if scheme.n != u.n:
        raise ValueError("scheme dimension differs from grid function dimension")
    if scheme.near_radius < u.h * (1 - 1e-12):
        raise ValueError("near_radius must be at least the grid spacing")
    if not u.box.contains(x[None], margin=scheme.near_radius)[0]:
        raise ValueError(f"point {x} is within near_radius of the sampling-box boundary")
    if scheme.check_far and scheme.far_radius < 2 * u.box.diameter * (1 - 1e-12):
        raise ValueError("far_radius must be at least twice the box diameter")


def _near_integral(M: np.ndarray, rho: float, n: int, s: float) -> float:
    """1/2 int_{|z|<rho} z^T M z |z|^{-n-2s} dz."""
    return 0.5 * np.trace(M) * sphere_area(n) / n * rho ** (2 - 2 * s) / (2 - 2 * s)


def _mid_integral(u, x, ux, A, rho, R, scheme, panels=None):
    """det-free part: int_{half sphere} int_rho^R (u(x+Az)+u(x-Az)-2u(x)) r^{-2s} dr/r."""
    dirs, wd = scheme.half_sphere()
    r, wr = scheme.radial_rule(rho, R, panels)
    Ad = dirs @ A  # A symmetric: rows are A @ omega
    disp = (r[:, None, None] * Ad[None, :, :]).reshape(-1, u.n)
    plus = u.evaluate(x + disp)
    minus = u.evaluate(x - disp)
    g = (plus + minus - 2 * ux).reshape(r.size, dirs.shape[0])
    return float(np.einsum("i,ij,j->", wr * r ** (-2 * scheme.s), g, wd))


def eval_L_A_detail(u: GridFunction, A: ControlMatrix | np.ndarray, x, scheme: QuadratureScheme,
                    H: np.ndarray | None = None, H_coarse: np.ndarray | None = None) -> Evaluation:
    x = np.asarray(x, dtype=float)
    _check_point(u, x, scheme)
    A = A if isinstance(A, ControlMatrix) else ControlMatrix(A)
    Am = A.entries
    n, s = u.n, scheme.s
    ux = float(u.evaluate(x[None])[0])
    if H is None:
        H = hessian(u, x)
    if H_coarse is None:
        H_coarse = hessian(u, x, 2 * u.h)
    M = Am @ H @ Am
    rho = scheme.near_radius / A.lambda_max
    R = scheme.far_radius / A.lambda_min
    near = A.det * _near_integral(M, rho, n, s)
    mid = A.det * _mid_integral(u, x, ux, Am, rho, R, scheme)
    # mid-zone quadrature error: halve the angular and the radial rule separately
    # (halving both at once can cancel by accident)
    mid_err = 0.0
    for coarse in (scheme.with_(n_angle=max(scheme.n_angle // 2, 4)),
                   scheme.with_(n_panels=max(scheme.n_panels // 2, 1))):
        mid_err += abs(mid - A.det * _mid_integral(u, x, ux, Am, rho, R, coarse))
    # Richardson-type estimate of the Taylor-model error: redo the split at rho/2
    near_half = A.det * _near_integral(M, rho / 2, n, s)
    mid_gap = A.det * _mid_integral(u, x, ux, Am, rho / 2, rho, scheme, panels=2)
    near_err = abs(near - (near_half + mid_gap))
    # finite-difference Hessian error, step h against 2h (O(h^2), left uncorrected)
    near_err += A.det * abs(_near_integral(Am @ (H - H_coarse) @ Am, rho, n, s))
    tail, tail_err = u.exterior.tail(x, Am, R, s)
    far = tail - ux * A.det * sphere_area(n) * R ** (-2 * s) / (2 * s)
    return Evaluation(near + mid + far, near, mid, far, near_err, tail_err, mid_err)


def _L_A_value(u, A: ControlMatrix, x, ux, H, scheme) -> float:
    """Same value as eval_L_A_detail without the error-estimation passes."""
    Am = A.entries
    rho = scheme.near_radius / A.lambda_max
    R = scheme.far_radius / A.lambda_min
    near = A.det * _near_integral(Am @ H @ Am, rho, u.n, scheme.s)
    mid = A.det * _mid_integral(u, x, ux, Am, rho, R, scheme)
    tail, _ = u.exterior.tail(x, Am, R, scheme.s)
    return near + mid + tail - ux * A.det * sphere_area(u.n) * R ** (-2 * scheme.s) / (2 * scheme.s)


def eval_L_A(u: GridFunction, A, x, scheme: QuadratureScheme) -> float:
    """L_A u(x) for one control matrix."""
    x = np.asarray(x, dtype=float)
    _check_point(u, x, scheme)
    A = A if isinstance(A, ControlMatrix) else ControlMatrix(A)
    return _L_A_value(u, A, x, float(u.evaluate(x[None])[0]), hessian(u, x), scheme)


def eval_Fs(u: GridFunction, controls: ControlSet, x, scheme: QuadratureScheme):
    """Discretized infimum over the control set; ties go to the earliest member.

    Returns ``(value, argmin_matrix)``.
    """
    value, idx, _ = eval_Fs_all(u, controls, x, scheme)
    return value, controls[idx]


def eval_Fs_all(u, controls, x, scheme):
    """Value, argmin index and the full vector of L_A u(x) over the control set."""
    x = np.asarray(x, dtype=float)
    _check_point(u, x, scheme)
    H = hessian(u, x)
    ux = float(u.evaluate(x[None])[0])
    vals = np.array([_L_A_value(u, A, x, ux, H, scheme) for A in controls])
    # members within roundoff of the minimum count as tied; the earliest wins
    tie = 1e-10 * max(float(np.max(np.abs(vals))), abs(ux), 1e-300)
    idx = int(np.argmax(vals <= vals.min() + tie))
    return float(vals.min()), idx, vals


def eval_Ds(u: GridFunction, theta: float, x, scheme: QuadratureScheme, resolution=(5, 8)):
    """Nonlocal Monge-Ampere operator: infimum over det A = 1, lambda_min(A) >= theta."""
    cs = build_control_set(ControlSetSpec("monge_ampere", u.n, theta, 1.0, *resolution))
    return eval_Fs(u, cs, x, scheme)


def eval_fractional_laplacian(u: GridFunction, x, scheme: QuadratureScheme) -> float:
    """(-Delta)^s u(x) = C_{n,s} * (-L_I u(x)), with C_{n,s} taken from the configuration."""
    return scheme.config.c_ns * -eval_L_A(u, np.eye(u.n), x, scheme)


def half_space_constant(n: int, s: float) -> float:
    """int_{t>1} int_{R^{n-1}} (t^2 + |tau|^2)^{-(n+2s)/2} dtau dt."""
    return np.pi ** ((n - 1) / 2) * gamma(s + 0.5) / gamma(n / 2 + s) / (2 * s)


def reflection_mass(x, plane, controls: ControlSet, s) -> float:
    """inf over controls of int_Sigma |A^{-1}(x - y~)|^{-(n+2s)} dy.

    ``plane`` is ``(normal, offset)`` describing {y : normal . y = offset}; Sigma is the
    side containing x and y~ the mirror image of y.  With z = A^{-1} v the integration
    region becomes a half space at distance d / |A nu|, so each member contributes
    det(A) |A nu|^{2s} K_{n,s} / d^{2s} in closed form.
    """
    s = float(getattr(s, "s", s))  # a QuadratureScheme or the order itself
    x = np.asarray(x, dtype=float)
    nu, b = plane
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    d = abs(float(nu @ x) - b)
    if d <= 0:
        raise ValueError("point lies on the plane: reflection mass diverges")
    K = half_space_constant(x.size, s)
    vals = [A.det * np.linalg.norm(A.entries @ nu) ** (2 * s) * K / d ** (2 * s) for A in controls]
    return float(min(vals))


def evaluate_many(fn, points, threads: int = 1):
    """Map a pointwise evaluator over points, optionally in a thread pool."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if threads <= 1:
        return [fn(p) for p in pts]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, pts))
