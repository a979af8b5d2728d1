"""The nonlocal Monge-Ampere operator approaches det(D^2 u)^{1/n} as s -> 1.

For u = sqrt(1 + |x|^2) the ratio (1 - s) D_s u(x) / det(D^2 u(x))^{1/n} should become
independent of x; its spread across points shrinks as s grows.
"""
from nonlocal_bellman.diagnostics import ma_limit_sweep

points = [(0.0, 0.0), (0.5, 0.0), (0.7, 0.7), (0.0, 1.2), (-1.5, 0.5)]
r = ma_limit_sweep([0.6, 0.8, 0.95], points, theta=0.2)
print(f"{r['controls']} det-one controls")
for s, spread in r["relative_spread"].items():
    vals = [row["r"] for row in r["rows"] if row["s"] == s]
    print(f"s = {s:4.2f}: r(x) = {[round(v, 4) for v in vals]}  relative spread {spread:.3f}")
