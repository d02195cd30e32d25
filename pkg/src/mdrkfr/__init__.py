"""1-D hyperbolic conservation-law solver.

Fourth-order, two-stage multi-derivative time stepping in a flux
reconstruction frame, with admissibility-preserving subcell blending,
a Fourier stability analyzer and a convergence/benchmark harness.
"""

from .core import (Grid, RunConfig, SolutionField, compute_dt, make_discretization,
                   make_grid, mdrk_step, rkfr_step)
from .errors import AdmissibilityError, ConfigurationError, SolverAbort, StencilStateError
from .harness import (CATALOG, build_case, case_config, convergence_suite,
                      error_norms, ingest_reference, run_case)
from .models import Burgers, Euler, LinearAdvection, VariableAdvection, exact_solution
from .operators import NodeSet, ReferenceOperators, make_operators

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError", "Burgers", "CATALOG", "ConfigurationError", "Euler",
    "Grid", "LinearAdvection", "NodeSet", "ReferenceOperators", "RunConfig",
    "SolutionField", "SolverAbort", "StencilStateError", "VariableAdvection",
    "build_case", "case_config", "compute_dt", "convergence_suite", "error_norms",
    "exact_solution", "ingest_reference", "make_discretization", "make_grid",
    "make_operators", "mdrk_step", "rkfr_step", "run_case",
]
