"""Solver registry mapping backend names to solver functions."""

import time
from datetime import datetime, timezone
from enum import Enum
from typing import Callable, Dict, List, Optional

from core.exceptions import InvalidArgumentError
from core.monitoring.logger import get_logger, record_solver_run
from core.services.solvers import (
    SolverOptions,
    SolverResult,
    SolverStatus,
    TvUlogProblem,
    solve_dual_smoothing,
    solve_primal_smoothing,
    solve_primal_smoothing_lbfgsb,
    solve_tv_ulog_socp,
    solve_ulog_quadratic,
)

logger = get_logger(__name__)

SolverFunc = Callable[[TvUlogProblem, SolverOptions], SolverResult]


class SolverHealth(Enum):
    """Solver status enumeration."""
    REGISTERED = "registered"
    HEALTHY = "healthy"
    DEGRADED = "degraded"


class SolverInfo:
    """Information about a registered solver."""

    def __init__(self, name: str, func: SolverFunc, description: str, interior_point: bool):
        self.name = name
        self.func = func
        self.description = description
        self.interior_point = interior_point
        self.health = SolverHealth.REGISTERED
        self.last_run = None
        self.runs = 0
        self.last_status: Optional[SolverStatus] = None

    def default_options(self, **overrides) -> SolverOptions:
        if self.interior_point:
            return SolverOptions.interior_point(**overrides)
        return SolverOptions.first_order(**overrides)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "health": self.health.value,
            "runs": self.runs,
            "last_status": self.last_status.value if self.last_status else None,
            "last_run": self.last_run.isoformat() if self.last_run else None,
        }


class SolverRegistry:
    """Registry of solver backends."""

    def __init__(self):
        self._solvers: Dict[str, SolverInfo] = {}

    def register(self, name: str, func: SolverFunc, description: str, interior_point: bool = False) -> SolverInfo:
        """Register a solver under a name."""
        info = SolverInfo(name, func, description, interior_point)
        self._solvers[name] = info
        return info

    def get(self, name: str) -> SolverInfo:
        """Get solver info by name."""
        if name not in self._solvers:
            raise InvalidArgumentError(
                f"unknown solver '{name}'",
                detail={"available": self.names()},
            )
        return self._solvers[name]

    def names(self) -> List[str]:
        return list(self._solvers)

    def run(self, name: str, problem: TvUlogProblem, opts: Optional[SolverOptions] = None) -> SolverResult:
        """Run a solver and record its status."""
        info = self.get(name)
        opts = info.default_options() if opts is None else opts
        start = time.perf_counter()
        result = info.func(problem, opts)
        elapsed = time.perf_counter() - start

        info.runs += 1
        info.last_run = datetime.now(timezone.utc)
        info.last_status = result.status
        info.health = (SolverHealth.DEGRADED if result.status == SolverStatus.NUMERICAL_FAILURE
                       else SolverHealth.HEALTHY)
        record_solver_run(name, elapsed, result.status.value)
        return result


# Global solver registry instance
solver_registry = SolverRegistry()


def register_solver(name: str, func: SolverFunc, description: str, interior_point: bool = False) -> SolverInfo:
    """Register a solver with the global registry."""
    return solver_registry.register(name, func, description, interior_point)


def get_solver(name: str) -> SolverInfo:
    return solver_registry.get(name)


def available_solvers() -> List[str]:
    return solver_registry.names()


register_solver("dual-smoothing", solve_dual_smoothing, "FGP on the Nesterov-smoothed dual")
register_solver("primal-smoothing", solve_primal_smoothing, "FGP on the Huber-smoothed primal")
register_solver("socp", solve_tv_ulog_socp, "Interior-point second-order cone program", interior_point=True)
register_solver("ulog", solve_ulog_quadratic, "FGP on the quadratic ULoG cost")
register_solver("primal-lbfgsb", solve_primal_smoothing_lbfgsb, "L-BFGS-B on the Huber-smoothed primal")
