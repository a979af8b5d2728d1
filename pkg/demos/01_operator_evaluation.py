"""Evaluate the nonlocal Bellman operator on a Gaussian and check it against oracles.

For the identity control L_I is a multiple of the fractional Laplacian, so the Fourier
side gives an exact reference.  The infimum over the anisotropic control set sits below
L_I, and the error budget splits into near, mid and far contributions.
"""
import numpy as np

from nonlocal_bellman import QuadratureScheme, eval_Fs, eval_fractional_laplacian
from nonlocal_bellman.controls import bellman_set
from nonlocal_bellman.core import AnalyticTerm, Box, OperatorConfig, make_grid_function
from nonlocal_bellman.oracle import oracle_eval
from nonlocal_bellman.quadrature import eval_L_A_detail

s = 0.5
u = make_grid_function(Box.cube(4.0), 0.025, "gaussian", {})
scheme = QuadratureScheme(OperatorConfig(s=s))
g = AnalyticTerm("gaussian", {})

print("fractional Laplacian of exp(-|x|^2), s = 1/2")
print(f"{'x':>14s} {'quadrature':>14s} {'Fourier':>14s} {'rel.err':>9s}")
for x in [(0.0, 0.0), (0.3, 0.2), (-0.5, 0.4), (0.6, -0.3)]:
    q = eval_fractional_laplacian(u, x, scheme)
    f = oracle_eval(g, "frac_laplacian_fourier", x, s)
    print(f"{str(x):>14s} {q:14.8f} {f:14.8f} {abs(q - f) / abs(f):9.1e}")

# where the value comes from, and how much of it is uncertain
ev = eval_L_A_detail(u, np.eye(2), (0.3, 0.2), scheme)
print("\nL_I u(0.3, 0.2) =", f"{ev.value:.8f}")
print(f"  near {ev.near:+.3e} (err {ev.near_error:.1e})  mid {ev.mid:+.3e} (err {ev.mid_error:.1e})"
      f"  far {ev.far:+.3e} (err {ev.far_error:.1e})")

# the infimum over 27 anisotropic controls picks a stretched kernel
cs = bellman_set(0.5, 2.0)
for x in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]:
    v, A = eval_Fs(u, cs, x, scheme)
    w, V = np.linalg.eigh(A.entries)
    print(f"F_s u{x} = {v:+.6f}  eigenvalues of argmin {w.round(3)}  axis {V[:, 0].round(3)}")
