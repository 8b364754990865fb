"""Box-constrained sparse regression with an exact cardinality penalty.

The solver anneals a smoothed counting penalty inside projection-gradient
dynamics, then certifies (and if needed corrects) the limit point into a
local minimizer of the original penalized problem.  Two-sided boxes are
handled by variable splitting.  :class:`L0BoxRegressor` wraps the solver
in a scikit-learn estimator.
"""

from .model import (
    BoxSet,
    ConfigurationError,
    DataError,
    DynamicsParams,
    LossModel,
    ProblemSpec,
    QuadraticLoss,
    ScheduleKind,
    check_mu_star,
    default_mu_star,
    estimate_grad_bound,
    project_box,
    quadratic_gradient,
    quadratic_problem,
    select_mu_star,
    zero_tolerance,
)
from .smoothing import (
    SmoothEval,
    theta,
    theta_grad_mu,
    theta_grad_s,
    theta_sum,
    theta_sum_grad_mu,
    theta_sum_grad_x,
)
from .dynamics import (
    Certificate,
    MuSchedule,
    NumericalDivergenceError,
    SolveReport,
    SolverState,
    mu_at,
    rhs,
    solve,
    stationarity_residual,
    step,
)
from .correction import (
    SolverConsistencyError,
    SupportPartition,
    certify_local_min,
    correct,
    correction_solve,
    mu_update_point,
    partition,
    solve_and_correct,
    support_indices,
)
from .splitting import (
    TwoSidedSolution,
    TwoSidedSpec,
    clean_complementarity,
    recombine,
    solve_two_sided,
    split,
)
from .problem_io import load_problem
from .estimator import L0BoxRegressor

__version__ = "0.1.0"

__all__ = [
    "BoxSet",
    "Certificate",
    "ConfigurationError",
    "DataError",
    "DynamicsParams",
    "L0BoxRegressor",
    "LossModel",
    "MuSchedule",
    "NumericalDivergenceError",
    "ProblemSpec",
    "QuadraticLoss",
    "ScheduleKind",
    "SmoothEval",
    "SolveReport",
    "SolverConsistencyError",
    "SolverState",
    "SupportPartition",
    "TwoSidedSolution",
    "TwoSidedSpec",
    "certify_local_min",
    "check_mu_star",
    "clean_complementarity",
    "correct",
    "correction_solve",
    "default_mu_star",
    "estimate_grad_bound",
    "load_problem",
    "mu_at",
    "mu_update_point",
    "partition",
    "project_box",
    "quadratic_gradient",
    "quadratic_problem",
    "recombine",
    "rhs",
    "select_mu_star",
    "solve",
    "solve_and_correct",
    "solve_two_sided",
    "split",
    "stationarity_residual",
    "step",
    "support_indices",
    "theta",
    "theta_grad_mu",
    "theta_grad_s",
    "theta_sum",
    "theta_sum_grad_mu",
    "theta_sum_grad_x",
    "zero_tolerance",
]
