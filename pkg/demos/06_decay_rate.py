"""Far-field decay of F_s applied to a bump.

Outside the support F_s psi(x) is a pure integral of psi against the kernel, so it decays
like |x|^{-(n+2s)}; the fitted log-log slope recovers the exponent.
"""
from nonlocal_bellman.controls import bellman_set, identity_set
from nonlocal_bellman.diagnostics import decay_exponent_fit

for s in (0.3, 0.7):
    for name, cs in (("{I}", identity_set()), ("bellman", bellman_set())):
        r = decay_exponent_fit(cs, s)
        print(f"s = {s}, {name:8s}: slope {r['slope']:+.3f}, expected {r['expected']:+.1f}")
