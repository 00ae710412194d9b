"""Boundary elements with dual reciprocity for multi-term time-fractional PDEs.

The spatial operator is reduced by a constant-element boundary element
method with multiquadric particular solutions; the resulting system of
fractional ODEs for the fictitious source is solved by a shifted-Chebyshev
Tau method built on operational matrices of Caputo derivatives.
"""
from .bem import (BemOperators, NearBoundaryWarning, RbfSet, ReducedOdeSystem,
                  SingularOperatorError, build_operators, build_ode_system,
                  reconstruct_field)
from .chebyshev import ChebBasis
from .geometry import (BoundaryCurve, Disk, PolarCurve, Rectangle, discretize_boundary,
                       example5_curve, generate_interior_nodes, square01)
from .metrics import ErrorReport, error_norms, p_tau_order, p_zeta_order
from .pipeline import ConfigError, RunConfig, RunResult, build_geometry, run
from .problems import ProblemSpec, get_problem, manufactured
from .special import CaputoOrder, ConvergenceError, caputo_quadrature, mittag_leffler
from .tau import SingularTauError, TauSolution, assemble_tau_system, solve_tau

__version__ = "0.1.0"

__all__ = [
    "BemOperators", "NearBoundaryWarning", "RbfSet", "ReducedOdeSystem",
    "SingularOperatorError", "build_operators", "build_ode_system", "reconstruct_field",
    "ChebBasis", "BoundaryCurve", "Disk", "PolarCurve", "Rectangle",
    "discretize_boundary", "example5_curve", "generate_interior_nodes", "square01",
    "ErrorReport", "error_norms", "p_tau_order", "p_zeta_order",
    "ConfigError", "RunConfig", "RunResult", "build_geometry", "run",
    "ProblemSpec", "get_problem", "manufactured",
    "CaputoOrder", "ConvergenceError", "caputo_quadrature", "mittag_leffler",
    "SingularTauError", "TauSolution", "assemble_tau_system", "solve_tau",
    "__version__",
]
