"""First eigenpair of the Gaussian-weighted p-Laplacian on convex polygons.

Computes the smallest eigenvalue and positive eigenfunction of the operator
div(|grad u|^{p-2} grad u) - (x, grad u)|grad u|^{p-2} with Dirichlet
conditions, by minimizing the regularized Rayleigh quotient over a P1 space
with Gaussian-weighted quadrature, and verifies log-concavity of the
eigenfunction and the eigenvalue inequality along Minkowski combinations.
"""

__version__ = "0.1.0"

from .analysis import (
    BMReport,
    ConcavityReport,
    bm_sweep,
    inf_convolution_trial,
    log_concavity_check,
    logpde_residual,
    midpoint_concavity_field,
)
from .eigensolver import (
    EigenResult,
    SolverConfig,
    minimize_rq,
    solve_first_eigenpair,
    warm_start_interpolate,
)
from .energy import (
    EnergyParams,
    NodalField,
    dirichlet_energy,
    energy_gradient,
    p_norm_constraint,
    rayleigh_quotient,
)
from .geometry import ConvexPolygon, contains, minkowski_combination, validate
from .mesh import TriMesh, quadrature_integrate, refine_uniform, triangulate
from .oracles import (
    RadialSolution,
    brute_force_min,
    linear_p2_eigensolve,
    radial_annulus_solution,
    radial_residual_check,
)

__all__ = [
    "__version__",
    "BMReport", "ConcavityReport", "bm_sweep", "inf_convolution_trial",
    "log_concavity_check", "logpde_residual", "midpoint_concavity_field",
    "EigenResult", "SolverConfig", "minimize_rq", "solve_first_eigenpair",
    "warm_start_interpolate",
    "EnergyParams", "NodalField", "dirichlet_energy", "energy_gradient",
    "p_norm_constraint", "rayleigh_quotient",
    "ConvexPolygon", "contains", "minkowski_combination", "validate",
    "TriMesh", "quadrature_integrate", "refine_uniform", "triangulate",
    "RadialSolution", "brute_force_min", "linear_p2_eigensolve",
    "radial_annulus_solution", "radial_residual_check",
]
