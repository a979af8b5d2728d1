"""Monotonicity in a slab by the sliding method.

Solve -F_s u = exp(-u) in 0 < x_2 < 2H with zero exterior, a mirror-symmetric stand-in
for the half-space problem on 0 < x_2 < H, and slide the solution upward below the
mirror plane.  Doubling H shows the truncation has settled.
"""
from nonlocal_bellman.acceptance import sliding_experiment

for H in (6.0, 12.0):
    u, rep, sl = sliding_experiment(H, h=0.125)
    print(f"H = {H}: {rep.n_unknowns} unknowns, converged={rep.converged}, max u {u.sup_norm():.5f}")
    for tau, m in zip(sl.taus, sl.minima):
        print(f"   tau = {tau:4.2f}  min w = {m:+.3e}")
