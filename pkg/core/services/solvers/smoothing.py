"""
Nesterov-smoothed TV-ULoG solvers.

Dual smoothing regularizes the primal with ``mu/2 ||w||^2`` and runs FGP on
the resulting smooth dual over per-site unit balls. Primal smoothing replaces
every site norm by its Huber approximation and runs FGP over the tube. The
quasi-Newton variant minimizes the same Huber objective with L-BFGS-B.
"""

import time
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from core.exceptions import InvalidArgumentError, NumericalFailureError
from core.monitoring.logger import get_logger
from core.services.scalespace import ScaleSpaceCube
from core.services.solvers.fgp import fgp
from core.services.solvers.problem import (
    SolverOptions,
    SolverResult,
    SolverStatus,
    TracePoint,
    TvUlogProblem,
    clamp,
    default_mu,
    point_result,
    project_balls,
)

logger = get_logger(__name__)


def huber(v: np.ndarray, mu: float) -> float:
    """
    Huber function of a vector: ``||v||^2 / (2 mu)`` inside the ``mu``-ball,
    ``||v|| - mu/2`` outside.

    Equals ``max_{||w|| <= 1} <v, w> - (mu/2) ||w||^2``.
    """
    if not mu > 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    norm = float(np.linalg.norm(v))
    return norm * norm / (2.0 * mu) if norm < mu else norm - 0.5 * mu


def _site_huber(norms: np.ndarray, mu: float) -> np.ndarray:
    return np.where(norms < mu, norms * norms / (2.0 * mu), norms - 0.5 * mu)


def smoothed_primal_objective(problem: TvUlogProblem, u: ScaleSpaceCube, mu: float) -> float:
    """``sum_sites huber((A u)_site, mu)``; lies within ``mu * sites / 2`` below the TV."""
    if not mu > 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu}")
    norms = np.linalg.norm(problem.site_field(u.flat()), axis=1)
    return float(_site_huber(norms, mu).sum())


def _resolve_mu(problem: TvUlogProblem, opts: SolverOptions) -> float:
    return default_mu(problem.tube) if opts.mu is None else opts.mu


def _finish(
    problem: TvUlogProblem,
    name: str,
    z: np.ndarray,
    trace,
    status: SolverStatus,
    iterations: int,
    mu: float,
    started: float,
) -> SolverResult:
    z = clamp(z, problem.lower, problem.upper)
    value = problem.tv(z)
    logger.info(
        f"{name} finished",
        status=status.value,
        iterations=iterations,
        objective=value,
        mu=mu,
        seconds=round(time.perf_counter() - started, 6),
    )
    return SolverResult(
        minimizer=problem.cube(z),
        objective=value,
        trace=list(trace),
        status=status,
        solver_name=name,
        iterations=iterations,
        info={"mu": mu},
    )


# =============================================================================
# Dual smoothing
# =============================================================================


class _PrimalRecovery:
    """
    Primal estimates of a dual smoothing run.

    Every gradient evaluation at a dual point ``y_k`` yields the tube-feasible
    ``w*(y_k)``; these are averaged with weights ``k``. At trace points the
    recovery of the current dual iterate and the running average are scored
    by their TV and the best one seen so far is kept.
    """

    def __init__(self, problem: TvUlogProblem, mu: float):
        self.problem = problem
        self.mu = mu
        self.total = np.zeros(problem.size)
        self.weight = 0.0
        self.calls = 0
        self.best: Optional[np.ndarray] = None
        self.best_value = float("inf")

    def primal(self, v: np.ndarray) -> np.ndarray:
        return clamp(-(self.problem.operators.AT @ v) / self.mu, self.problem.lower, self.problem.upper)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        w = self.primal(v)
        self.calls += 1
        self.total += self.calls * w
        self.weight += self.calls
        return -(self.problem.operators.A @ w)

    def _offer(self, z: np.ndarray):
        value = self.problem.tv(z)
        if value < self.best_value:
            self.best, self.best_value = z, value

    def score(self, v: np.ndarray) -> float:
        self._offer(self.primal(v))
        if self.weight > 0:
            self._offer(self.total / self.weight)
        return self.best_value


def solve_dual_smoothing(problem: TvUlogProblem, opts: SolverOptions) -> SolverResult:
    """
    FGP on the smoothed dual ``max_{v in S} min_{w in tube} <A w, v> + mu/2 ||w||^2``.

    The inner minimizer is ``w*(v) = P_tube(-A^T v / mu)``. The primal estimate
    is the lowest-TV candidate among the recoveries at trace points and the
    weighted average of the recoveries at gradient points; the trace reports
    the best TV found so far.
    """
    name = "dual-smoothing"
    if problem.tube.is_point():
        return point_result(problem, name)
    mu = _resolve_mu(problem, opts)
    components = problem.components
    L = problem.L_hat ** 2 / mu
    started = time.perf_counter()
    logger.info(f"{name} started", size=problem.size, L_hat=problem.L_hat, mu=mu)

    recovery = _PrimalRecovery(problem, mu)
    v0 = np.zeros(problem.size * components)
    try:
        run = fgp(recovery.gradient, lambda v: project_balls(v, components), L, v0, opts, recovery.score, label=name)
    except NumericalFailureError as e:
        logger.error(f"{name} failed", error=e.message)
        z = recovery.best if recovery.best is not None else recovery.primal(e.detail["x"])
        return _finish(problem, name, z, [], SolverStatus.NUMERICAL_FAILURE, e.detail["iteration"], mu, started)
    return _finish(problem, name, recovery.best, run.trace, run.status, run.iterations, mu, started)


# =============================================================================
# Primal smoothing
# =============================================================================


def _huber_value_and_gradient(problem: TvUlogProblem, z: np.ndarray, mu: float):
    ops = problem.operators
    field = problem.site_field(z)
    norms = np.linalg.norm(field, axis=1)
    value = float(_site_huber(norms, mu).sum())
    with np.errstate(divide="ignore"):
        weights = np.minimum(1.0 / mu, 1.0 / norms)
    g = ops.AT @ (field * weights[:, None]).reshape(-1)
    return value, g


def solve_primal_smoothing(problem: TvUlogProblem, opts: SolverOptions) -> SolverResult:
    """
    FGP on ``u -> sum_sites huber((A u)_site, mu)`` over the tube, started at
    the tube midpoint; the reported objective is the unsmoothed TV.
    """
    name = "primal-smoothing"
    if problem.tube.is_point():
        return point_result(problem, name)
    mu = _resolve_mu(problem, opts)
    lower, upper = problem.lower, problem.upper
    L = problem.L_hat ** 2 / mu
    started = time.perf_counter()
    logger.info(f"{name} started", size=problem.size, L_hat=problem.L_hat, mu=mu)

    def gradient(z: np.ndarray) -> np.ndarray:
        return _huber_value_and_gradient(problem, z, mu)[1]

    z0 = problem.tube.midpoint().flat().copy()
    try:
        run = fgp(gradient, lambda z: clamp(z, lower, upper), L, z0, opts, problem.tv, label=name)
    except NumericalFailureError as e:
        logger.error(f"{name} failed", error=e.message)
        return _finish(problem, name, e.detail["x"], [], SolverStatus.NUMERICAL_FAILURE,
                       e.detail["iteration"], mu, started)
    return _finish(problem, name, run.x, run.trace, run.status, run.iterations, mu, started)


def solve_primal_smoothing_lbfgsb(problem: TvUlogProblem, opts: SolverOptions) -> SolverResult:
    """Huber-smoothed primal problem solved by bound-constrained L-BFGS-B."""
    name = "primal-lbfgsb"
    if problem.tube.is_point():
        return point_result(problem, name)
    mu = _resolve_mu(problem, opts)
    started = time.perf_counter()
    logger.info(f"{name} started", size=problem.size, mu=mu)

    z0 = problem.tube.midpoint().flat().copy()
    trace = [TracePoint(0, 0.0, problem.tv(z0))]
    iteration = 0

    def callback(zk: np.ndarray):
        nonlocal iteration
        iteration += 1
        if iteration % opts.trace_every == 0:
            trace.append(TracePoint(iteration, time.perf_counter() - started, problem.tv(zk)))

    try:
        result = minimize(
            lambda z: _huber_value_and_gradient(problem, z, mu),
            z0,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(problem.lower, problem.upper)),
            callback=callback,
            options={"maxiter": opts.max_iters, "ftol": opts.tol * 1e-3, "gtol": 1e-12, "maxcor": 20},
        )
    except (ArithmeticError, ValueError) as e:
        logger.error(f"{name} failed", error=str(e))
        return _finish(problem, name, z0, trace, SolverStatus.NUMERICAL_FAILURE, iteration, mu, started)

    z = result.x
    if not np.all(np.isfinite(z)):
        return _finish(problem, name, z0, trace, SolverStatus.NUMERICAL_FAILURE, iteration, mu, started)
    if trace[-1].iteration != result.nit:
        trace.append(TracePoint(int(result.nit), time.perf_counter() - started, problem.tv(z)))
    # status 1 is the iteration cap; an abnormal line search stops at the attainable precision
    status = SolverStatus.ITERATION_LIMIT if result.status == 1 else SolverStatus.CONVERGED
    return _finish(problem, name, z, trace, status, int(result.nit), mu, started)
