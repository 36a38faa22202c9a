"""Double-phase problems with variable exponents on planar P1 meshes.

Modules: ``fieldexpr`` (expression fields), ``mesh`` (meshes and
quadrature), ``musielak`` (modulars and Luxemburg norms), ``operators``
(energies and residuals), ``nonvar`` (convection problem), ``var``
(variational problem), ``analysis`` (hypotheses and constants),
``estimators`` (scikit-learn wrappers) and ``cli``.
"""
from .analysis import (check_hypotheses, estimate_embedding_constant, example_4_1_constants,
                       lambda_star, r_lambda_bound, sobolev_conjugate, unit_ball_volume)
from .descent import NonConvergence
from .fieldexpr import DomainSpec, ScalarField, as_field, parse_expr, unparse
from .mesh import DiscreteFunction, Mesh, build_disc_mesh, build_rect_mesh
from .musielak import luxemburg_norm, modular_H, modular_px, norm_H, norm_W1H0
from .nonvar import RhsSpec, SolverParams, gl_solve, solve_convection, solve_monotone
from .operators import NonlinearitySpec, ProblemFields
from .var import CutoffSpec, cutoff_u_bar, minimize_I

__version__ = "0.1.0"

__all__ = [
    "check_hypotheses", "estimate_embedding_constant", "example_4_1_constants",
    "lambda_star", "r_lambda_bound", "sobolev_conjugate", "unit_ball_volume",
    "NonConvergence", "DomainSpec", "ScalarField", "as_field", "parse_expr", "unparse",
    "DiscreteFunction", "Mesh", "build_disc_mesh", "build_rect_mesh",
    "luxemburg_norm", "modular_H", "modular_px", "norm_H", "norm_W1H0",
    "RhsSpec", "SolverParams", "gl_solve", "solve_convection", "solve_monotone",
    "NonlinearitySpec", "ProblemFields", "CutoffSpec", "cutoff_u_bar", "minimize_I",
]
