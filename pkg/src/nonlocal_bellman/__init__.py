"""Nonlocal Bellman and Monge-Ampere operators: evaluation, Dirichlet solves and diagnostics."""
from .core import *  # noqa: F401,F403
from .controls import (ControlSetSpec, bellman_set, build_control_set, identity_set,
                       monge_ampere_set, refine)
from .quadrature import (QuadratureScheme, eval_Ds, eval_Fs, eval_fractional_laplacian, eval_L_A,
                         reflection_mass)
from .solver import (LatticeSystem, MonotonicityError, SolveReport, eigenpair_ball,
                     solve_dirichlet)
from .acceptance import reproduce_acceptance

__version__ = "0.1.0"
