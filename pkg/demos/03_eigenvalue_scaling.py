"""First Dirichlet eigenvalue of -F_s on discs and its scaling in the radius.

Homogeneity of the kernel gives lambda_1(R) = R^{-2s} lambda_1(1).  For the single
control {I}, lambda_1 * C_{n,s} is the first eigenvalue of the fractional Laplacian
(about 2.006 on the unit disc for s = 1/2).
"""
from nonlocal_bellman.controls import bellman_set, identity_set
from nonlocal_bellman.core import OperatorConfig, fractional_laplacian_constant
from nonlocal_bellman.solver import dense_eigenvalue, eigenpair_ball

cfg = OperatorConfig(s=0.5)
h = 0.05
e1 = eigenpair_ball(1.0, cfg, bellman_set(), h=h)
e2 = eigenpair_ball(2.0, cfg, bellman_set(), h=h)
print(f"bellman set: lambda1(1) = {e1.lambda1:.4f}, lambda1(2) = {e2.lambda1:.4f}, "
      f"ratio {e2.lambda1 / e1.lambda1:.4f} (expected 0.5)")
print(f"  {e1.iterations} inverse-power steps, residual {e1.residual:.1e}")

eI = eigenpair_ball(1.0, cfg, identity_set(), h=h)
print(f"identity: lambda1 = {eI.lambda1:.6f}, dense eigensolver {dense_eigenvalue(eI.system):.6f}")
print(f"  times C_(2,1/2): {eI.lambda1 * fractional_laplacian_constant(2, 0.5):.4f}")
