"""Monotone lattice discretization of L_A and the Dirichlet / eigenvalue solvers.

For one control A the discrete operator at an interior node x_i is

    L_A u(x_i) = sum_k w_k (u(x_i + k h) - u(x_i))

with w_k the exact kernel mass of the lattice cell around k h for cells outside the
near cube Q = [-(m+1/2) h, (m+1/2) h]^n, and inside Q a second-difference stencil
sum_v a_v (u(x+vh) + u(x-vh) - 2u(x)) whose second moment matches the kernel's on Q.
The a_v come from a linear program with a_v >= 0, so all off-diagonal weights are
nonnegative.  The diagonal is minus the total (infinite-lattice) mass, so rows sum to
zero exactly and constants are reproduced.

The kernel |A^{-1} y|^{-n-2s} is homogeneous of degree -n-2s, so everything is
computed once at h = 1 and rescaled by h^{-2s}.  Masses and moments of a cube are
reduced to integrals over its faces (cone formula):

    int_{|y|_inf > a} K = a^{-2s} / (2s) int_{dC} K dS,
    int_{|y|_inf < a} K y y^T = a^{2-2s} / (2-2s) int_{dC} K y y^T dS,

where dC is the boundary of the unit cube [-1, 1]^n.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import linalg
from scipy.optimize import linprog
from scipy.sparse.linalg import LinearOperator, gmres

from .core.config import ControlMatrix, ControlSet, OperatorConfig
from .core.functions import Box, ExteriorRule, GridFunction, MissingTailError
from .core.nonlinearity import Nonlinearity, hypothesis_report
from .core.problem import Geometry, ProblemSpec, ValidationError, lattice_box

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000
M_MAX = 6


class MonotonicityError(ValueError):
    """No nonnegative near-field stencil reproduces the kernel's second moment."""


class SolverError(RuntimeError):
    pass


# --- kernel geometry at h = 1 ------------------------------------------------------------

def _face_rule(n: int, q: int = 24):
    """Points and weights on the boundary of [-1, 1]^n."""
    x, w = np.polynomial.legendre.leggauss(q)
    pts, wts = [], []
    grids = np.meshgrid(*([x] * (n - 1)), indexing="ij")
    gw = np.ones_like(grids[0])
    for g in np.meshgrid(*([w] * (n - 1)), indexing="ij"):
        gw = gw * g
    face = np.stack([g.ravel() for g in grids], axis=1)
    for axis in range(n):
        for sign in (-1.0, 1.0):
            p = np.insert(face, axis, sign, axis=1)
            pts.append(p)
            wts.append(gw.ravel())
    return np.vstack(pts), np.concatenate(wts)


def _kernel(Ainv: np.ndarray, y: np.ndarray, s: float) -> np.ndarray:
    n = Ainv.shape[0]
    z = y @ Ainv.T
    return np.sum(z * z, axis=-1) ** (-(n + 2 * s) / 2)


def cube_mass_outside(A: np.ndarray, s: float, a: float) -> float:
    """int_{|y|_inf > a} |A^{-1} y|^{-n-2s} dy."""
    n = A.shape[0]
    y, w = _face_rule(n)
    return float(a ** (-2 * s) / (2 * s) * np.sum(w * _kernel(np.linalg.inv(A), y, s)))


def cube_second_moment(A: np.ndarray, s: float, a: float) -> np.ndarray:
    """int_{|y|_inf < a} |A^{-1} y|^{-n-2s} y y^T dy."""
    n = A.shape[0]
    y, w = _face_rule(n)
    k = w * _kernel(np.linalg.inv(A), y, s)
    return a ** (2 - 2 * s) / (2 - 2 * s) * np.einsum("i,ij,ik->jk", k, y, y)


def _primitive_directions(n: int, m: int) -> list:
    """One representative of each +-pair of primitive lattice vectors with |v|_inf <= m."""
    out = []
    for v in itertools.product(range(-m, m + 1), repeat=n):
        v = np.array(v)
        if not v.any() or math.gcd(*map(int, np.abs(v))) != 1:
            continue
        first = v[np.nonzero(v)[0][0]]
        if first > 0:
            out.append(v)
    out.sort(key=lambda v: (int(v @ v), tuple(v)))
    return out


def near_stencil(M: np.ndarray, m: int, scheme: str = "monotone"):
    """Directions v and weights a_v with sum_v a_v v v^T = M / 2.

    ``monotone`` solves min sum a_v |v|^4 subject to a_v >= 0 (most local nonnegative
    decomposition); returns None when infeasible.  ``nine_point`` is the classical
    axis-plus-diagonal fit, which has a negative weight whenever M has an off-diagonal
    entry; it is kept only for sensitivity experiments.
    """
    n = M.shape[0]
    target = 0.5 * M
    if scheme == "nine_point":
        # axis weights carry the diagonal, the +-diagonal pair +-b/2 the mixed entry
        dirs, wts = [], []
        for i in range(n):
            e = np.zeros(n, dtype=int)
            e[i] = 1
            dirs.append(e)
            wts.append(target[i, i])
        for i in range(n):
            for j in range(i + 1, n):
                for sign in (1, -1):
                    v = np.zeros(n, dtype=int)
                    v[i], v[j] = 1, sign
                    dirs.append(v)
                    wts.append(sign * target[i, j] / 2)
        return np.array(dirs), np.array(wts, dtype=float)
    # solve for a canonical signed-permutation image of M so that mirrored or permuted
    # controls get exactly mirrored / permuted stencils
    T = _canonical_transform(target)
    found = _monotone_fit(T @ target @ T.T, m)
    if found is None:
        return None
    dirs, a = found
    dirs = np.rint(dirs @ T).astype(int)  # v -> T^T v
    return dirs, a


def _signed_permutations(n: int):
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1.0, -1.0), repeat=n):
            T = np.zeros((n, n))
            T[np.arange(n), perm] = signs
            yield T


def _canonical_transform(M: np.ndarray) -> np.ndarray:
    best, key = None, None
    for T in _signed_permutations(M.shape[0]):
        k = tuple(np.round(T @ M @ T.T, 10).ravel())
        if key is None or k < key:
            best, key = T, k
    return best


def _monotone_fit(target: np.ndarray, m: int):
    """min sum a_v |v|^4 subject to sum a_v v v^T = target, a_v >= 0.

    (sum a_v |v|^2 is the trace of the target, constant on the feasible set, so the
    quartic cost is what makes the stencil prefer short directions.)
    """
    n = target.shape[0]
    dirs = _primitive_directions(n, m)
    iu = np.triu_indices(n)
    Aeq = np.array([np.outer(v, v)[iu] for v in dirs], dtype=float).T
    beq = target[iu]
    cost = np.array([float(v @ v) ** 2 for v in dirs])
    res = linprog(cost, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    keep = res.x > 1e-12 * np.max(res.x)
    # polish the LP's rounding so the moment identity holds to machine precision
    sol, *_ = np.linalg.lstsq(Aeq[:, keep], beq, rcond=None)
    if np.any(sol < 0):
        sol = res.x[keep]
    return np.array(dirs)[keep], sol


@dataclass
class LatticeKernel:
    """Stencil of one control at h = 1 on offsets |k|_inf <= radius.

    ``weights`` is indexed by offset + radius; the centre entry is zero.  ``mass`` is the
    total weight of the infinite lattice (minus the diagonal).  Values at spacing h are
    the h = 1 values times h^{-2s}.
    """

    A: ControlMatrix
    s: float
    radius: int
    m: int
    directions: np.ndarray
    alphas: np.ndarray
    weights: np.ndarray
    mass: float
    scheme: str = "monotone"

    @property
    def n(self) -> int:
        return self.A.n

    def min_offdiagonal(self) -> float:
        return float(np.min(self.weights))


def _cell_weights(A: np.ndarray, s: float, radius: int, m: int) -> np.ndarray:
    """Exact-ish kernel mass of each unit cell centred at k, |k|_inf <= radius, outside Q_m."""
    n = A.shape[0]
    Ainv = np.linalg.inv(A)
    ax = np.arange(-radius, radius + 1)
    K = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n).astype(float)
    dist = np.max(np.abs(K), axis=1)
    w = np.zeros(K.shape[0])
    # Gauss order by distance; the integrand is smooth on every cell outside Q
    bands = [(m + 1, m + 3, 8), (m + 4, 16, 4), (17, 64, 2), (65, np.inf, 1)]
    for lo, hi, q in bands:
        sel = (dist >= lo) & (dist <= hi)
        if not np.any(sel):
            continue
        x, wq = np.polynomial.legendre.leggauss(q)
        x, wq = 0.5 * x, 0.5 * wq
        acc = np.zeros(int(sel.sum()))
        for idx in itertools.product(range(q), repeat=n):
            off = x[list(idx)]
            acc += np.prod(wq[list(idx)]) * _kernel(Ainv, K[sel] + off, s)
        w[sel] = acc
    return w.reshape((2 * radius + 1,) * n)


_KERNEL_CACHE: dict = {}


def lattice_kernel(A, s: float, radius: int, near_cells: int = 2, scheme: str = "monotone",
                   check_monotone: bool = True) -> LatticeKernel:
    """Assemble the h = 1 stencil for control ``A``.

    The near cube starts at ``near_cells`` and grows up to ``M_MAX`` until a nonnegative
    decomposition exists.  ``check_monotone=False`` accepts whatever ``scheme`` gives.
    """
    A = A if isinstance(A, ControlMatrix) else ControlMatrix(A)
    key = (A.entries.tobytes(), float(s), int(radius), int(near_cells), scheme, check_monotone)
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]
    n = A.n
    m = max(1, int(near_cells))
    while True:
        if m >= radius:
            raise MonotonicityError("stencil window too small for the near cube")
        M = cube_second_moment(A.entries, s, m + 0.5)
        found = near_stencil(M, m, scheme)
        if found is not None:
            dirs, alphas = found
            if not check_monotone or np.all(alphas >= 0):
                break
        if scheme != "monotone" or m >= M_MAX:
            raise MonotonicityError(
                f"no monotone near stencil with |v|_inf <= {m} for control with eigenvalues "
                f"{A.lambda_min:.3g}..{A.lambda_max:.3g}")
        m += 1
    W = _cell_weights(A.entries, s, radius, m)
    c = (radius,) * n
    for v, a in zip(dirs, alphas):
        W[tuple(np.array(c) + v)] += a
        W[tuple(np.array(c) - v)] += a
    mass = cube_mass_outside(A.entries, s, m + 0.5) + 2 * float(np.sum(alphas))
    if check_monotone and np.min(W) < 0:
        raise MonotonicityError("negative off-diagonal weight")
    ker = LatticeKernel(A, s, radius, m, dirs, alphas, W, mass, scheme)
    _KERNEL_CACHE[key] = ker
    return ker


def near_cells_for(config: OperatorConfig, h: float) -> int:
    """Near-cube half width in cells from the configured near radius."""
    return max(1, int(round(config.near_radius / h - 0.5)))


# --- discrete operators on a box ---------------------------------------------------------

def _far_level(rule: ExteriorRule) -> float:
    """Constant standing in for the exterior data beyond the padded sampling region."""
    try:
        return rule.far_value()
    except MissingTailError:
        lo = hi = 0.0
        for t in rule.terms:
            if t.tag == "linear_cap":
                lo += float(t.params.get("lo", -np.inf))
                hi += float(t.params.get("hi", np.inf))
            elif t.tag == "constant":
                lo += float(t.params.get("value", 1.0))
                hi += float(t.params.get("value", 1.0))
            elif t.tag not in ("gaussian", "bump"):
                raise
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise
        return 0.5 * (lo + hi)


@dataclass
class DiscreteOperator:
    """Lattice L_A on the interior nodes of a box.

    ``weights`` are the off-diagonal weights at spacing h by offset, ``diagonal`` the
    (negative) diagonal entry, ``exterior`` the contribution of the fixed exterior data
    at each interior node (row order of ``interior_index``).
    """

    A: ControlMatrix
    h: float
    box: Box
    interior: np.ndarray
    kernel: LatticeKernel
    exterior: np.ndarray
    scale: float

    @property
    def weights(self) -> np.ndarray:
        return self.kernel.weights * self.scale

    @property
    def diagonal(self) -> float:
        return -self.kernel.mass * self.scale

    @property
    def interior_index(self) -> np.ndarray:
        return np.argwhere(self.interior)

    def row(self, i: int):
        """(column indices into interior_index, off-diagonal weights) of interior row i."""
        idx = self.interior_index
        off = idx - idx[i] + self.kernel.radius
        inside = np.all((off >= 0) & (off < self.weights.shape[0]), axis=1)
        w = np.zeros(idx.shape[0])
        w[inside] = self.weights[tuple(off[inside].T)]
        w[i] = 0.0
        return np.nonzero(w)[0], w[w != 0]

    def row_sums(self, exterior_mass: bool = True) -> np.ndarray:
        """Row sums of the full (interior + exterior) operator; zero by construction."""
        ones = np.ones(self.box.shape(self.h))
        return _correlate(self.weights, ones)[self.interior] + self.diagonal + self._far_mass()

    def _far_mass(self) -> np.ndarray:
        ones = np.ones(self.box.shape(self.h))
        return self.kernel.mass * self.scale - _correlate(self.weights, ones)[self.interior]

    def apply(self, u_box: np.ndarray, far_value: float = 0.0) -> np.ndarray:
        """L_A u at interior nodes for full box values (exterior data filled in)."""
        u_box = np.asarray(u_box, dtype=float)
        inner = _correlate(self.weights, u_box)[self.interior]
        return inner + self.diagonal * u_box[self.interior] + far_value * self._far_mass()

    def check(self, tol: float = 1e-10) -> dict:
        """Monotone-scheme conditions: off-diagonal >= 0, diagonal < 0, zero row sums."""
        rs = self.row_sums()
        return {"min_offdiagonal": float(np.min(self.weights)),
                "diagonal": self.diagonal,
                "max_abs_row_sum": float(np.max(np.abs(rs))) if rs.size else 0.0,
                "monotone": bool(np.min(self.weights) >= -tol * abs(self.diagonal) and self.diagonal < 0)}


def _correlate(weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    """out[i] = sum_k weights[k + r] values[i + k] on the support of ``values`` (zero outside)."""
    from scipy.signal import fftconvolve
    r = weights.shape[0] // 2
    pad = [(r, r)] * values.ndim
    big = np.pad(values, pad)
    out = fftconvolve(big, weights[(slice(None, None, -1),) * values.ndim], mode="valid")
    return out


def assemble(A, geometry: Geometry, config: OperatorConfig, h: float,
             exterior: ExteriorRule | None = None, box: Box | None = None,
             check_monotone: bool = True, scheme: str = "monotone",
             near_cells: int | None = None, pad: int | None = None) -> DiscreteOperator:
    """Discrete L_A for one control on the lattice interior nodes of ``geometry``."""
    system = LatticeSystem.build(geometry, config, ControlSet([A if isinstance(A, ControlMatrix)
                                                              else ControlMatrix(A)], kind="explicit"),
                                 h, exterior or ExteriorRule.zero(), box=box,
                                 check_monotone=check_monotone, scheme=scheme,
                                 near_cells=near_cells, pad=pad)
    return system.operators[0]


@dataclass
class LatticeSystem:
    """All control operators on one box, with FFT-based application."""

    geometry: Geometry
    config: OperatorConfig
    controls: ControlSet
    h: float
    box: Box
    interior: np.ndarray
    exterior_rule: ExteriorRule
    operators: list
    boundary_values: np.ndarray
    far_value: float
    _fft: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, geometry: Geometry, config: OperatorConfig, controls: ControlSet, h: float,
              exterior: ExteriorRule, box: Box | None = None, check_monotone: bool = True,
              scheme: str = "monotone", near_cells: int | None = None, pad: int | None = None):
        if geometry.n != config.n:
            raise ValidationError("geometry.n: does not match config.n")
        s = config.s
        near = near_cells_for(config, h) if near_cells is None else near_cells
        if box is None:
            box = lattice_box(geometry, h, (max(near, M_MAX) + 1) * h)
        shape = box.shape(h)
        nodes = np.stack(np.meshgrid(*[np.linspace(a, b, k) for a, b, k in zip(box.lo, box.hi, shape)],
                                     indexing="ij"), axis=-1)
        interior = geometry.contains(nodes.reshape(-1, geometry.n)).reshape(shape)
        if not interior.any():
            raise ValidationError("geometry: no lattice nodes inside the domain at this spacing")
        # interior nodes must keep their near stencil inside the box
        idx = np.argwhere(interior)
        edge = min(int(idx.min()), int(np.min(np.array(shape) - 1 - idx)))
        if edge < M_MAX + 1 and edge < near + 1:
            raise ValidationError("box margin too small for the near stencil")
        if pad is None:
            pad = 0 if exterior.kind in ("zero", "constant") else max(shape)
        radius = max(shape) - 1 + pad
        far = _far_level(exterior)
        # exterior data on the padded box; zero on interior nodes
        big = Box(tuple(np.asarray(box.lo) - pad * h), tuple(np.asarray(box.hi) + pad * h))
        bshape = big.shape(h)
        bnodes = np.stack(np.meshgrid(*[np.linspace(a, b, k) for a, b, k in zip(big.lo, big.hi, bshape)],
                                      indexing="ij"), axis=-1).reshape(-1, geometry.n)
        g = exterior.evaluate(bnodes).reshape(bshape)
        inner = tuple(slice(pad, pad + k) for k in shape)
        g_int = np.zeros(bshape, dtype=bool)
        g_int[inner] = interior
        g[g_int] = 0.0
        boundary_values = g[inner].copy()
        ones = np.ones(bshape)
        ops = []
        scale = h ** (-2 * s)
        for A in controls:
            ker = lattice_kernel(A, s, radius, near, scheme=scheme, check_monotone=check_monotone)
            W = ker.weights * scale
            ext_near = _correlate(W, g)[inner][interior]
            mass_in = _correlate(W, ones)[inner][interior]
            ext = ext_near + far * (ker.mass * scale - mass_in)
            ops.append(DiscreteOperator(A, h, box, interior, _crop(ker, max(shape) - 1), ext, scale))
        return cls(geometry, config, controls, h, box, interior, exterior, ops, boundary_values, far)

    # --- shapes and packing --------------------------------------------------------------

    @property
    def n_unknowns(self) -> int:
        return int(self.interior.sum())

    @property
    def shape(self) -> tuple:
        return self.interior.shape

    def to_box(self, u_int: np.ndarray, exterior: bool = True) -> np.ndarray:
        out = self.boundary_values.copy() if exterior else np.zeros(self.shape)
        out[self.interior] = u_int
        return out

    def grid_function(self, u_int: np.ndarray) -> GridFunction:
        return GridFunction(self.box, self.h, self.to_box(u_int), self.exterior_rule)

    def nodes(self) -> np.ndarray:
        return np.stack(np.meshgrid(*[np.linspace(a, b, k) for a, b, k in
                                      zip(self.box.lo, self.box.hi, self.shape)], indexing="ij"), axis=-1)

    def interior_nodes(self) -> np.ndarray:
        return self.nodes()[self.interior]

    # --- FFT machinery -------------------------------------------------------------------

    def _plan(self):
        if "shape" not in self._fft:
            r = self.operators[0].kernel.radius
            full = tuple(k + 2 * r for k in self.shape)
            fshape = tuple(sfft.next_fast_len(k, real=True) for k in full)
            self._fft["shape"] = fshape
            self._fft["r"] = r
            self._fft["kernels"] = [None] * len(self.operators)
        return self._fft["shape"], self._fft["r"]

    def _kernel_fft(self, c: int):
        fshape, r = self._plan()
        if self._fft["kernels"][c] is None:
            W = self.operators[c].weights
            self._fft["kernels"][c] = sfft.rfftn(W, fshape)
        return self._fft["kernels"][c]

    def _spectrum(self, u_box: np.ndarray):
        fshape, _ = self._plan()
        return sfft.rfftn(u_box, fshape)

    def _inner(self, spec, c: int) -> np.ndarray:
        """Interior-node values of the weight correlation for control c (weights are even)."""
        fshape, r = self._plan()
        full = sfft.irfftn(spec * self._kernel_fft(c), fshape)
        sl = tuple(slice(2 * r - r, 2 * r - r + k) for k in self.shape)
        return full[sl][self.interior]

    # --- operator evaluation -------------------------------------------------------------

    def apply_all(self, u_int: np.ndarray, exterior: bool = True) -> np.ndarray:
        """L_c u at interior nodes for every control, shape (controls, unknowns)."""
        u_box = self.to_box(u_int, exterior=False)
        spec = self._spectrum(u_box)
        out = np.empty((len(self.operators), self.n_unknowns))
        for c, op in enumerate(self.operators):
            out[c] = self._inner(spec, c) + op.diagonal * u_int
            if exterior:
                out[c] += op.exterior
        return out

    def Fs(self, u_int: np.ndarray, exterior: bool = True):
        """Discrete F_s u at interior nodes and the argmin policy (ties: first control)."""
        vals = self.apply_all(u_int, exterior)
        pol = np.argmin(vals, axis=0)
        return vals[pol, np.arange(vals.shape[1])], pol

    def apply_policy(self, u_int: np.ndarray, policy: np.ndarray, exterior: bool = True) -> np.ndarray:
        u_box = self.to_box(u_int, exterior=False)
        spec = self._spectrum(u_box)
        out = np.empty(self.n_unknowns)
        for c in np.unique(policy):
            sel = policy == c
            op = self.operators[c]
            v = self._inner(spec, c) + op.diagonal * u_int
            if exterior:
                v = v + op.exterior
            out[sel] = v[sel]
        return out

    def diagonal(self, policy: np.ndarray) -> np.ndarray:
        return np.array([op.diagonal for op in self.operators])[policy]

    def exterior_term(self, policy: np.ndarray) -> np.ndarray:
        ext = np.stack([op.exterior for op in self.operators])
        return ext[policy, np.arange(policy.size)]

    def dense(self, policy: np.ndarray) -> np.ndarray:
        """Dense matrix of u -> L_{policy} u on interior unknowns (exterior data excluded)."""
        idx = np.argwhere(self.interior)
        N = idx.shape[0]
        out = np.zeros((N, N))
        block = max(1, 2_000_000 // max(N, 1))
        for c in np.unique(policy):
            op = self.operators[c]
            W = op.weights
            r = op.kernel.radius
            rows = np.nonzero(policy == c)[0]
            for b in range(0, rows.size, block):
                rb = rows[b:b + block]
                off = idx[None, :, :] - idx[rb, None, :] + r
                out[rb] = W[tuple(np.moveaxis(off, -1, 0))]
            out[rows, rows] = op.diagonal
        return out


def _crop(ker: LatticeKernel, radius: int) -> LatticeKernel:
    if radius >= ker.radius:
        return ker
    d = ker.radius - radius
    W = ker.weights[(slice(d, d + 2 * radius + 1),) * ker.n]
    return LatticeKernel(ker.A, ker.s, radius, ker.m, ker.directions, ker.alphas, W, ker.mass, ker.scheme)


# --- linear solves ----------------------------------------------------------------------

def _solve_frozen(system: LatticeSystem, policy: np.ndarray, shift: float, rhs: np.ndarray,
                  x0: np.ndarray | None, rtol: float = 1e-13):
    """Solve (-L_policy + shift) u = rhs on interior unknowns (exterior part in rhs)."""
    N = system.n_unknowns
    if N <= DENSE_LIMIT:
        M = -system.dense(policy)
        M[np.diag_indices(N)] += shift
        return linalg.solve(M, rhs, assume_a="gen"), 0
    diag = -system.diagonal(policy) + shift

    def mv(v):
        return -system.apply_policy(v, policy, exterior=False) + shift * v

    op = LinearOperator((N, N), matvec=mv, dtype=float)
    pre = LinearOperator((N, N), matvec=lambda v: v / diag, dtype=float)
    x, info = gmres(op, rhs, x0=x0, rtol=rtol, atol=0.0, restart=60, maxiter=40, M=pre)
    if info != 0:
        # one more round with iterative refinement from the current iterate
        x, info = gmres(op, rhs, x0=x, rtol=rtol, atol=0.0, restart=120, maxiter=40, M=pre)
    return x, info


def howard(system: LatticeSystem, shift: float, rhs: np.ndarray, u0: np.ndarray,
           max_policy: int = 50, tol: float = 0.0, history: list | None = None):
    """Solve max_c(-L_c u) + shift u = rhs by policy iteration.  Returns (u, policy, steps)."""
    u = u0.copy()
    _, pol = system.Fs(u)
    steps = 0
    cols = np.arange(u.size)
    dmax = float(np.max(-np.array([op.diagonal for op in system.operators])))
    for steps in range(1, max_policy + 1):
        b = rhs + system.exterior_term(pol)
        u, info = _solve_frozen(system, pol, shift, b, u)
        allv = system.apply_all(u)
        best = np.argmin(allv, axis=0)
        # switch only on an improvement above roundoff, otherwise ties make policies cycle
        eps = 1e-12 * dmax * max(float(np.max(np.abs(u))) if u.size else 0.0, 1.0)
        keep = allv[best, cols] >= allv[pol, cols] - eps
        new = np.where(keep, pol, best)
        vals = allv[new, cols]
        res = float(np.max(np.abs(-vals + shift * u - rhs))) if u.size else 0.0
        if history is not None:
            history.append(res)
        if np.array_equal(new, pol) or res <= tol:
            pol = new
            break
        pol = new
    return u, pol, steps


# --- reports -----------------------------------------------------------------------------

@dataclass
class SolveReport:
    iterations: dict
    residual_history: list
    policy_map: np.ndarray
    converged: bool
    residual: float
    tol: float
    n_unknowns: int
    stencil: dict
    seconds: float
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations,
                "residual_history": [float(r) for r in self.residual_history],
                "policy_map": np.asarray(self.policy_map).tolist(),
                "converged": bool(self.converged), "residual": float(self.residual),
                "tol": self.tol, "n_unknowns": self.n_unknowns, "stencil": self.stencil,
                "notes": list(self.notes)}


def _stencil_summary(system: LatticeSystem) -> dict:
    ms = [op.kernel.m for op in system.operators]
    minw = min(float(np.min(op.kernel.weights)) for op in system.operators)
    return {"near_cells": sorted(set(ms)), "scheme": system.operators[0].kernel.scheme,
            "min_offdiagonal_h1": minw}


def system_for(problem: ProblemSpec, **kw) -> LatticeSystem:
    return LatticeSystem.build(problem.geometry, problem.config, problem.controls, problem.h,
                               problem.exterior_data, **kw)


def solve_dirichlet(problem: ProblemSpec, tol: float = 1e-8, max_iter: int = 200,
                    system: LatticeSystem | None = None, omega: float = 1.0, u0=None,
                    max_policy: int = 50, **build):
    """Solve -F_s u = f(u) in Omega, u = g outside, on the lattice.

    Outer loop: damped Picard with dominance shift Lambda >= Lip(f) on the current range,
    solving max_c(-L_c u_new) + Lambda u_new = f(u_old) + Lambda u_old by Howard policy
    iteration.  Returns ``(GridFunction, SolveReport)``; non-convergence is reported,
    not raised.
    """
    t0 = time.perf_counter()
    if system is None:
        system = system_for(problem, **build)
    f = problem.f
    if f.kind == "gradient_weighted":
        raise ValidationError("f.kind: gradient-dependent nonlinearities are not supported by the solver")
    N = system.n_unknowns
    history: list = []
    policy_steps = 0
    if u0 is None:
        # exterior-data extension: the f = 0 problem
        u, pol, k = howard(system, 0.0, np.zeros(N), np.zeros(N), max_policy)
        policy_steps += k
    else:
        u = np.asarray(u0, dtype=float).copy()
    gvals = system.boundary_values[~system.interior]
    glo = float(np.min(gvals)) if gvals.size else 0.0
    ghi = float(np.max(gvals)) if gvals.size else 0.0

    def residual(v):
        Fv, _ = system.Fs(v)
        return float(np.max(np.abs(Fv + f(v)))) if v.size else 0.0

    res = residual(u)
    history.append(res)
    # residuals cannot go below roundoff in the operator application
    dmax = float(np.max(-np.array([op.diagonal for op in system.operators])))
    scale = max(float(np.max(np.abs(u))) if N else 0.0, abs(glo), abs(ghi), 1.0)
    floor = 1e3 * np.finfo(float).eps * dmax * scale
    eff_tol = max(tol, floor)
    notes = []
    if floor > tol:
        notes.append(f"tolerance {tol:g} below the roundoff floor {floor:.3g}; using the floor")
    shift = 0.0
    outer = 0
    converged = res <= eff_tol
    w = omega
    while not converged and outer < max_iter:
        outer += 1
        lo, hi = min(float(u.min()), glo), max(float(u.max()), ghi)
        span = max(hi - lo, 1e-3)
        shift = max(shift, f.lipschitz(lo - 0.1 * span, hi + 0.1 * span))
        rhs = f(u) + shift * u
        new, pol, k = howard(system, shift, rhs, u, max_policy)
        policy_steps += k
        cand = u + w * (new - u)
        r = residual(cand)
        if not np.isfinite(r):
            notes.append(f"non-finite residual at outer step {outer}")
            break
        if r > res and w > 1 / 64:
            w *= 0.5
            notes.append(f"damping halved to {w} at outer step {outer}")
        u, res = cand, r
        history.append(res)
        converged = res <= eff_tol
    _, pol = system.Fs(u)
    report = SolveReport({"outer": outer, "policy": policy_steps}, history,
                         system.to_box(pol.astype(float), exterior=False).astype(int) - 0,
                         bool(converged), res, tol, N, _stencil_summary(system),
                         time.perf_counter() - t0, notes)
    return system.grid_function(u), report


def discrete_residual(system: LatticeSystem, u_int: np.ndarray, f: Nonlinearity) -> float:
    Fu, _ = system.Fs(u_int)
    return float(np.max(np.abs(Fu + f(u_int))))


# --- first eigenpair ---------------------------------------------------------------------

@dataclass
class EigenPair:
    lambda1: float
    psi: GridFunction
    residual: float
    iterations: int
    converged: bool
    R: float
    system: LatticeSystem | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "R": self.R,
                "psi_max": float(self.psi.values.max()), "psi_min_interior":
                    float(self.psi.values[self.system.interior].min()) if self.system else None}


def eigenpair_ball(R: float, config: OperatorConfig, controls: ControlSet, tol: float = 1e-10,
                   h: float | None = None, max_iter: int = 500, system: LatticeSystem | None = None,
                   **build) -> EigenPair:
    """First Dirichlet eigenpair of -F_s in the ball B_R(0) by inverse power iteration.

    Each step solves -F_s v = psi_k (zero exterior) by Howard policy iteration and
    normalizes psi_{k+1} = v / max v; lambda1 = 1 / max v at convergence.
    """
    if R <= 0:
        raise ValidationError("R: must be positive")
    h = R / 20 if h is None else h
    if system is None:
        system = LatticeSystem.build(Geometry.ball(R, n=config.n), config, controls, h,
                                     ExteriorRule.zero(), **build)
    N = system.n_unknowns
    psi = np.ones(N)
    v = psi
    lam = 0.0
    converged = False
    it = 0
    res = np.inf
    for it in range(1, max_iter + 1):
        v, pol, _ = howard(system, 0.0, psi, v)
        if np.min(v) <= 0:
            # leave the positive cone: restart from its projection
            v = np.maximum(v, 1e-12 * np.max(np.abs(v)))
        lam_new = 1.0 / np.max(v)
        new = v * lam_new
        step = float(np.max(np.abs(new - psi)))
        psi, lam = new, lam_new
        Fpsi, _ = system.Fs(psi)
        res = float(np.max(np.abs(Fpsi + lam * psi)))
        if step <= tol and res <= tol * lam:
            converged = True
            break
    gf = GridFunction(system.box, h, system.to_box(psi), ExteriorRule.zero())
    return EigenPair(float(lam), gf, res, it, converged, float(R), system)


def dense_eigenvalue(system: LatticeSystem, control: int = 0) -> float:
    """Smallest eigenvalue of the symmetric matrix -L_c (single control) on the interior."""
    M = -system.dense(np.full(system.n_unknowns, control))
    M = 0.5 * (M + M.T)
    return float(linalg.eigh(M, eigvals_only=True, subset_by_index=[0, 0])[0])


def estimate_M0(f: Nonlinearity, eig: EigenPair | float, s: float | None = None) -> float:
    """(lambda1 / c0)^{1/(2s)}, requiring the positivity hypothesis on f."""
    lam = eig.lambda1 if isinstance(eig, EigenPair) else float(eig)
    if s is None:
        if not isinstance(eig, EigenPair) or eig.system is None:
            raise ValueError("s is needed when no eigenpair system is given")
        s = eig.system.config.s
    rep = hypothesis_report(f)
    if rep["H2"].status is False:
        raise ValueError(f"f fails the positivity hypothesis: {rep['H2'].note}")
    return float((lam / f.c0) ** (1 / (2 * s)))
