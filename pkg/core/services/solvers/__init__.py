"""TV-ULoG solver backends."""

from core.services.solvers.fgp import FgpRun, fgp, momentum_sequence
from core.services.solvers.problem import (
    SolverOptions,
    SolverResult,
    SolverStatus,
    TracePoint,
    TvUlogProblem,
    default_mu,
    flatten,
    objective,
    project_ball_field,
    project_box,
    unflatten,
)
from core.services.solvers.smoothing import (
    huber,
    smoothed_primal_objective,
    solve_dual_smoothing,
    solve_primal_smoothing,
    solve_primal_smoothing_lbfgsb,
)
from core.services.solvers.socp import (
    ConeProgram,
    SocpSolution,
    socp_iteration_trace,
    solve_socp_interior_point,
    solve_tv_ulog_socp,
    to_socp,
)
from core.services.solvers.ulog import solve_ulog_quadratic

__all__ = [
    "ConeProgram",
    "FgpRun",
    "SocpSolution",
    "SolverOptions",
    "SolverResult",
    "SolverStatus",
    "TracePoint",
    "TvUlogProblem",
    "default_mu",
    "fgp",
    "flatten",
    "huber",
    "momentum_sequence",
    "objective",
    "project_ball_field",
    "project_box",
    "smoothed_primal_objective",
    "socp_iteration_trace",
    "solve_dual_smoothing",
    "solve_primal_smoothing",
    "solve_primal_smoothing_lbfgsb",
    "solve_socp_interior_point",
    "solve_tv_ulog_socp",
    "solve_ulog_quadratic",
    "to_socp",
    "unflatten",
]
