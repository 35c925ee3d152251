"""Quadratic ULoG baseline: minimize ``||lap u||^2`` over the tube."""

import time

import numpy as np

from core.exceptions import NumericalFailureError
from core.monitoring.logger import get_logger
from core.services.solvers.fgp import fgp
from core.services.solvers.problem import (
    SolverOptions,
    SolverResult,
    SolverStatus,
    TvUlogProblem,
    clamp,
)

logger = get_logger(__name__)


def ulog_objective(problem: TvUlogProblem, z: np.ndarray) -> float:
    lap = problem.operators.laplacian @ z
    return float(lap @ lap)


def solve_ulog_quadratic(problem: TvUlogProblem, opts: SolverOptions) -> SolverResult:
    """FGP with step ``1 / (2 ||lap||^2)``; the reported objective is ``||lap u||^2``."""
    name = "ulog"
    ops = problem.operators
    lower, upper = problem.lower, problem.upper
    if problem.tube.is_point():
        value = ulog_objective(problem, lower)
        return SolverResult(problem.tube.lower, value, [], SolverStatus.CONVERGED, name, iterations=1)

    L = 2.0 * problem.laplacian_norm ** 2
    started = time.perf_counter()
    logger.info(f"{name} started", size=problem.size, L=L)

    def gradient(z: np.ndarray) -> np.ndarray:
        return 2.0 * (ops.laplacian_T @ (ops.laplacian @ z))

    def value(z: np.ndarray) -> float:
        return ulog_objective(problem, z)

    z0 = problem.tube.midpoint().flat().copy()
    try:
        run = fgp(gradient, lambda z: clamp(z, lower, upper), L, z0, opts, value, label=name)
        z, trace, status, iterations = run.x, run.trace, run.status, run.iterations
    except NumericalFailureError as e:
        logger.error(f"{name} failed", error=e.message)
        z, trace, status, iterations = e.detail["x"], [], SolverStatus.NUMERICAL_FAILURE, e.detail["iteration"]

    z = clamp(z, lower, upper)
    result = SolverResult(
        minimizer=problem.cube(z),
        objective=value(z),
        trace=trace,
        status=status,
        solver_name=name,
        iterations=iterations,
        info={"tv": problem.tv(z)},
    )
    logger.info(
        f"{name} finished",
        status=status.value,
        iterations=iterations,
        objective=result.objective,
        seconds=round(time.perf_counter() - started, 6),
    )
    return result
