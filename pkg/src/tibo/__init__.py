"""Spectral solver for second-order nonlinear two-point boundary value problems.

``y''`` is represented by its values on the right half of an odd periodic
grid; ``y'`` and ``y`` follow by exact term-wise integration of the sine
interpolant, with the two integration constants fixed by the boundary
conditions.  The ODE residual is minimized with L-BFGS using an FFT gradient.
"""
from .core import (
    BoundaryConditions,
    OdeProblem,
    SolveStatus,
    TiboObjective,
    TiboSolution,
    coeffs_from_z,
    gradient,
    objective,
    reconstruct_u,
    reconstruct_v,
    residual_max,
    solve,
)
from .errors import (
    ConfigError,
    GridError,
    IntegrationError,
    NonFiniteResidualError,
    SingularBoundaryError,
    SymmetryError,
    TiboError,
)
from .optimizer import ConstraintSet, DerivativeWindow, LowerBound, OptimizerOptions, minimize
from .periodic_extension import CutoffFn, GridSpec, make_grid
from .rk_shooting import rk4_ivp, shoot_dirichlet, shoot_mixed
from .trig_interp import TrigPolyOdd, eval_antiderivative, eval_derivative, evaluate, odd_interpolate

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditions",
    "OdeProblem",
    "SolveStatus",
    "TiboObjective",
    "TiboSolution",
    "coeffs_from_z",
    "gradient",
    "objective",
    "reconstruct_u",
    "reconstruct_v",
    "residual_max",
    "solve",
    "ConfigError",
    "GridError",
    "IntegrationError",
    "NonFiniteResidualError",
    "SingularBoundaryError",
    "SymmetryError",
    "TiboError",
    "ConstraintSet",
    "DerivativeWindow",
    "LowerBound",
    "OptimizerOptions",
    "minimize",
    "CutoffFn",
    "GridSpec",
    "make_grid",
    "rk4_ivp",
    "shoot_dirichlet",
    "shoot_mixed",
    "TrigPolyOdd",
    "eval_antiderivative",
    "eval_derivative",
    "evaluate",
    "odd_interpolate",
]
