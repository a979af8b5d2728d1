"""Independent reference values for tests.

Nothing here touches the lattice, the interpolation or the three-zone split of the
production path: functions are the exact closed forms, integrals are adaptive.

* ``frac_laplacian_fourier``: radial Hankel-transform quadrature of |xi|^{2s} u^(xi)
  (Gaussian terms only; their Fourier transform is explicit).
* ``frac_laplacian_direct``: C_{n,s} P.V. int (u(x) - u(x+y)) |y|^{-n-2s} dy over the full
  sphere, first-difference form with the gradient term subtracted on |y| < 1.
* ``L_A_direct``: P.V. int (u(y) - u(x)) |A^{-1}(y-x)|^{-n-2s} dy, same regularization.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.special import gamma, jv

from .core.config import fractional_laplacian_constant
from .core.functions import AnalyticTerm, ExteriorRule

OPERATORS = ("frac_laplacian_fourier", "frac_laplacian_direct", "L_A_direct")


class NoFourierTransformError(ValueError):
    pass


def _terms(u):
    if isinstance(u, AnalyticTerm):
        return (u,)
    if isinstance(u, ExteriorRule):
        if u.kind == "constant":
            return (AnalyticTerm("constant", {"value": u.value}),)
        return u.terms
    if isinstance(u, str):
        return (AnalyticTerm(u, {}),)
    return tuple(u)


def gaussian_fraclap(x, s: float, amp=1.0, width=1.0, center=None) -> float:
    """(-Delta)^s of amp exp(-|x-c|^2 / width^2) via the Fourier side."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    q = np.linalg.norm(x - c) / width
    # g(x) = exp(-|x|^2), g^(k) = pi^{n/2} exp(-k^2/4)
    if q < 1e-12:
        val = (2 * np.pi) ** (-n) * 2 * np.pi ** (n / 2) / gamma(n / 2) * np.pi ** (n / 2) \
            * 2 ** (2 * s + n - 1) * gamma(s + n / 2)
    else:
        nu = n / 2 - 1

        def f(k):
            return k ** (2 * s + n / 2) * np.pi ** (n / 2) * np.exp(-k * k / 4) * jv(nu, k * q)

        I, _ = integrate.quad(f, 0, 60, limit=400, epsabs=1e-13, epsrel=1e-12)
        val = (2 * np.pi) ** (-n / 2) * q ** (1 - n / 2) * I
    return amp * width ** (-2 * s) * val


def _gradient(fn, x, eps=1e-5):
    n = x.size
    E = np.eye(n) * eps
    pts = np.vstack([x + E, x - E])
    v = fn(pts)
    return (v[:n] - v[n:]) / (2 * eps)


def _pv_direct(fn, x, s, Ainv=None, epsrel=1e-10, epsabs=1e-12):
    """P.V. int (u(x+y) - u(x)) k(y) dy with k = |Ainv y|^{-n-2s} (identity when None)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n != 2:
        raise NotImplementedError("direct oracle is two-dimensional")
    ux = float(fn(x[None])[0])
    grad = _gradient(fn, x)
    Ainv = np.eye(2) if Ainv is None else Ainv

    def radial(t):
        w = np.array([np.cos(t), np.sin(t)])
        aw = np.linalg.norm(Ainv @ w)
        cut = 1.0 / aw  # |Ainv y| < 1 on r < cut
        gw = float(grad @ w)

        def g(r):
            return (float(fn((x + r * w)[None])[0]) - ux - (r * gw if r < cut else 0.0)) * r ** (-1 - 2 * s)

        a, _ = integrate.quad(g, 0, cut, limit=200, epsabs=epsabs, epsrel=epsrel)
        b, _ = integrate.quad(g, cut, np.inf, limit=400, epsabs=epsabs, epsrel=epsrel)
        return (a + b) * aw ** (-2 - 2 * s)

    val, _ = integrate.quad(radial, 0, 2 * np.pi, limit=400, epsabs=epsabs, epsrel=epsrel)
    return val


def _compact_direct(term: AnalyticTerm, x, s, Ainv):
    """int u(y) |Ainv (y - x)|^{-n-2s} dy for a bump whose support avoids x (no singularity)."""
    c = np.asarray(term.params.get("center", [0.0, 0.0]), dtype=float)
    rad = float(term.params.get("radius", 1.0))

    def g(r, t):
        y = c + r * np.array([np.cos(t), np.sin(t)])
        return float(term(y[None])[0]) * np.linalg.norm(Ainv @ (y - x)) ** (-2 - 2 * s) * r

    val, _ = integrate.dblquad(g, 0, 2 * np.pi, 0, rad, epsabs=1e-14, epsrel=1e-10)
    return val


def oracle_eval(u, operator_tag: str, x, s: float = 0.5, A=None, dense_params=None) -> float:
    """Reference value of an operator applied to a closed-form function.

    ``u`` is an :class:`AnalyticTerm`, a sequence of them (summed), an analytic
    :class:`ExteriorRule`, or a bare tag name with default parameters.
    """
    if operator_tag not in OPERATORS:
        raise ValueError(f"unknown operator tag {operator_tag!r}")
    terms = _terms(u)
    x = np.asarray(x, dtype=float)
    n = x.size
    dense = dict(dense_params or {})
    if all(t.tag == "constant" for t in terms):
        return 0.0
    terms = tuple(t for t in terms if t.tag != "constant")
    if operator_tag == "frac_laplacian_fourier":
        total = 0.0
        for t in terms:
            if t.tag != "gaussian":
                raise NoFourierTransformError(f"no closed Fourier transform for tag {t.tag}")
            total += gaussian_fraclap(x, s, t.params.get("amp", 1.0), t.params.get("width", 1.0),
                                      t.params.get("center"))
        return total

    def fn(p):
        return sum(t(p) for t in terms)

    if operator_tag == "frac_laplacian_direct":
        return -fractional_laplacian_constant(n, s) * _pv_direct(fn, x, s, **dense)
    Ainv = np.eye(n) if A is None else np.linalg.inv(getattr(A, "entries", A))
    if len(terms) == 1 and terms[0].tag == "bump":
        t = terms[0]
        c = np.asarray(t.params.get("center", np.zeros(n)), dtype=float)
        if np.linalg.norm(x - c) > float(t.params.get("radius", 1.0)):
            return _compact_direct(t, x, s, Ainv)
    return _pv_direct(fn, x, s, Ainv, **dense)
