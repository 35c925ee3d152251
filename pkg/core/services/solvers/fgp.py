"""
Fast gradient projection.

Projected gradient descent with Nesterov momentum: step ``1/L`` from the
extrapolated point, projection onto the feasible set, and momentum weights
from ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from core.exceptions import InvalidArgumentError, NumericalFailureError
from core.monitoring.logger import get_logger
from core.services.solvers.problem import SolverOptions, SolverStatus, TracePoint

logger = get_logger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]


def next_momentum(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def momentum_sequence(n: int) -> List[float]:
    """``t_0 = 1`` followed by the next ``n - 1`` momentum parameters."""
    ts = [1.0]
    while len(ts) < n:
        ts.append(next_momentum(ts[-1]))
    return ts


@dataclass
class FgpRun:
    """Final iterate of an FGP run with its trace."""
    x: np.ndarray
    iterations: int
    status: SolverStatus
    trace: List[TracePoint] = field(default_factory=list)
    objective: float = float("nan")


def fgp(
    gradient: Oracle,
    projector: Oracle,
    L: float,
    x0: np.ndarray,
    opts: SolverOptions,
    objective: Callable[[np.ndarray], float],
    label: str = "fgp",
) -> FgpRun:
    """
    Minimize a smooth convex function over a closed convex set.

    Args:
        gradient: Gradient oracle of the smooth function
        projector: Euclidean projection onto the feasible set
        L: Lipschitz constant of the gradient
        x0: Feasible starting point
        opts: Iteration cap, stall tolerance, trace cadence
        objective: Objective reported in the trace and used for the stall test
        label: Name used in log records

    Returns:
        FgpRun with the last iterate

    Raises:
        NumericalFailureError: On a non-finite gradient; ``detail`` holds the
            last finite iterate under ``"x"``
    """
    if not (L > 0 and math.isfinite(L)):
        raise InvalidArgumentError(f"Lipschitz constant must be positive, got {L}")
    step = 1.0 / L
    x = np.array(x0, dtype=np.float64, copy=True)
    y = x.copy()
    t = 1.0

    start = time.perf_counter()
    value = objective(x)
    trace = [TracePoint(0, 0.0, value)]
    checkpoint = value
    status = SolverStatus.ITERATION_LIMIT
    iteration = 0

    for iteration in range(1, opts.max_iters + 1):
        g = gradient(y)
        if not np.all(np.isfinite(g)):
            raise NumericalFailureError(f"{label}: non-finite gradient", detail={"iteration": iteration, "x": x})
        x_next = projector(y - step * g)
        t_next = next_momentum(t)
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next

        at_trace = iteration % opts.trace_every == 0
        at_window = iteration % opts.stall_window == 0
        if at_trace or at_window or iteration == opts.max_iters:
            value = objective(x)
            if not math.isfinite(value):
                raise NumericalFailureError(f"{label}: non-finite objective", detail={"iteration": iteration, "x": x})
            trace.append(TracePoint(iteration, time.perf_counter() - start, value))
            if at_window:
                change = abs(checkpoint - value)
                if change <= opts.tol * max(abs(checkpoint), abs(value)):
                    status = SolverStatus.CONVERGED
                    break
                checkpoint = value
                logger.debug(f"{label} progress", iteration=iteration, objective=value)

    if trace[-1].iteration != iteration:
        value = objective(x)
        trace.append(TracePoint(iteration, time.perf_counter() - start, value))
    return FgpRun(x=x, iterations=iteration, status=status, trace=trace, objective=trace[-1].objective)
