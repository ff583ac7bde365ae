"""Hardy weights for Sturm-Liouville and radial elliptic operators:
construction of optimal weight families and numerical certification of
their optimality (criticality, null-criticality, optimality at infinity).
"""

from .exprlang import parse_expr, eval_expr, format_expr, compile_expr
from .grid import Interval, GridFunction, make_grid, sample
from .ode import solve_ivp, pruefer_zero_count
from .sturm import (SLProblem, SolutionPair, apply_operator,
                    reduction_of_order, principal_solution)
from .families import (EPFamily, WeightFamily1D, ep_solution, ep_weight,
                       classical_family, improved_family, external_family,
                       improved_eigenfunction, liouville_transform,
                       weight_series, series_weight_closed_form,
                       family_residual)
from .certify import (DivergenceVerdict, OptimalityReport,
                      classify_improper_integral, certify_optimality_1d,
                      oscillation_evidence, principal_eigenvalue)
from .radial import (RadialProblem, NDWeight, green_potential,
                     make_radial_problem, classical_weight, pullback_weight,
                     improved_weight, rellich_check,
                     null_criticality_integrals, unit_sphere_area,
                     bump_density)

__version__ = "0.1.0"

__all__ = [
    "parse_expr", "eval_expr", "format_expr", "compile_expr",
    "Interval", "GridFunction", "make_grid", "sample",
    "solve_ivp", "pruefer_zero_count",
    "SLProblem", "SolutionPair", "apply_operator", "reduction_of_order",
    "principal_solution",
    "EPFamily", "WeightFamily1D", "ep_solution", "ep_weight",
    "classical_family", "improved_family", "external_family",
    "improved_eigenfunction", "liouville_transform", "weight_series",
    "series_weight_closed_form", "family_residual",
    "DivergenceVerdict", "OptimalityReport", "classify_improper_integral",
    "certify_optimality_1d", "oscillation_evidence", "principal_eigenvalue",
    "RadialProblem", "NDWeight", "green_potential", "make_radial_problem",
    "classical_weight", "pullback_weight", "improved_weight",
    "rellich_check", "null_criticality_integrals", "unit_sphere_area",
    "bump_density",
    "__version__",
]
