"""Problem, options and result types shared by the TV-ULoG solver backends."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from core.config.settings import config
from core.exceptions import DimensionMismatchError, InvalidArgumentError
from core.services.scalespace import (
    ScaleGrid,
    ScaleSpaceCube,
    ScaleSpaceOperators,
    SpatialGrid,
    Tube,
    VectorFieldCube,
    laplacian_norm_estimate,
    operator_norm_estimate,
    operators_for,
)

# Power iteration approaches the norm from below
NORM_SAFETY = 1.01


class SolverStatus(Enum):
    """Termination status of a solver run."""
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    seconds: float
    objective: float


@dataclass(frozen=True)
class SolverOptions:
    """
    Options of a single solver run.

    ``tol`` is the relative objective change over ``stall_window`` iterations
    for first-order methods and the relative duality gap for the cone solver.
    """
    max_iters: int
    tol: float
    mu: Optional[float] = None
    trace_every: int = 10
    stall_window: int = 100

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.tol > 0):
            raise InvalidArgumentError(f"tol must be positive, got {self.tol}")
        if self.mu is not None and not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidArgumentError(f"mu must be positive, got {self.mu}")
        if self.trace_every < 1 or self.stall_window < 1:
            raise InvalidArgumentError("trace_every and stall_window must be >= 1")

    @classmethod
    def first_order(cls, **overrides) -> "SolverOptions":
        """Defaults for the FGP and quasi-Newton backends."""
        base = dict(
            max_iters=config.solver.first_order_max_iters,
            tol=config.solver.first_order_tol,
            trace_every=config.solver.trace_every,
            stall_window=config.solver.stall_window,
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    @classmethod
    def interior_point(cls, **overrides) -> "SolverOptions":
        """Defaults for the cone-program backend."""
        base = dict(
            max_iters=config.solver.socp_max_iters,
            tol=config.solver.socp_tol,
            trace_every=1,
            stall_window=config.solver.stall_window,
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def with_mu(self, mu: float) -> "SolverOptions":
        return replace(self, mu=mu)


@dataclass(frozen=True, eq=False)
class SolverResult:
    """Minimizer, reported objective, convergence trace and status of a run."""
    minimizer: ScaleSpaceCube
    objective: float
    trace: List[TracePoint]
    status: SolverStatus
    solver_name: str
    iterations: int = 0
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == SolverStatus.CONVERGED


class TvUlogProblem:
    """
    Minimize the scale-normalized TV of the normalized Laplacian over a tube.

    Holds the tube, the sparse operator bundle of its grids and the cached
    norm estimate ``L_hat >= ||A||_2``.
    """

    def __init__(self, tube: Tube):
        if not isinstance(tube, Tube):
            raise InvalidArgumentError(f"expected Tube, got {type(tube).__name__}")
        self.tube = tube
        self.operators: ScaleSpaceOperators = operators_for(tube.spatial, tube.scale)
        self._norm_A: Optional[float] = None
        self._norm_laplacian: Optional[float] = None
        self.lower = tube.lower.flat()
        self.upper = tube.upper.flat()

    @property
    def spatial(self) -> SpatialGrid:
        return self.tube.spatial

    @property
    def scale(self) -> ScaleGrid:
        return self.tube.scale

    @property
    def size(self) -> int:
        return self.operators.size

    @property
    def components(self) -> int:
        return self.operators.components

    @property
    def L_hat(self) -> float:
        if self._norm_A is None:
            self._norm_A = NORM_SAFETY * operator_norm_estimate(self.spatial, self.scale)
        return self._norm_A

    @property
    def laplacian_norm(self) -> float:
        if self._norm_laplacian is None:
            self._norm_laplacian = NORM_SAFETY * laplacian_norm_estimate(self.spatial, self.scale)
        return self._norm_laplacian

    def site_field(self, z: np.ndarray) -> np.ndarray:
        """``A z`` as an ``(N, d+1)`` array of site vectors."""
        return (self.operators.A @ z).reshape(-1, self.components)

    def tv(self, z: np.ndarray) -> float:
        """TV of the normalized Laplacian of a flattened cube."""
        return float(np.linalg.norm(self.site_field(z), axis=1).sum())

    def cube(self, z: np.ndarray) -> ScaleSpaceCube:
        return unflatten(z, self.spatial, self.scale)


# =============================================================================
# Flattening, objective and projections
# =============================================================================


def flatten(u: ScaleSpaceCube) -> np.ndarray:
    """Row-major enumeration ``((i * N2) + j) * K + k``."""
    return np.array(u.flat(), copy=True)


def unflatten(z: np.ndarray, spatial: SpatialGrid, scale: ScaleGrid) -> ScaleSpaceCube:
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    expected = spatial.size * scale.K
    if z.size != expected:
        raise DimensionMismatchError("vector length does not match the grids", expected=expected, actual=z.size)
    return ScaleSpaceCube(spatial, scale, z)


def objective(problem: TvUlogProblem, u: ScaleSpaceCube) -> float:
    """``TV(lap u)``."""
    if not u.same_grids(problem.tube.lower):
        raise DimensionMismatchError("cube and problem live on different grids")
    return problem.tv(u.flat())


def clamp(z: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(z, lower), upper)


def project_box(u: ScaleSpaceCube, tube: Tube) -> ScaleSpaceCube:
    """Entrywise projection onto the tube."""
    if not u.same_grids(tube.lower):
        raise DimensionMismatchError("cube and tube live on different grids")
    return u.with_values(clamp(u.values, tube.lower.values, tube.upper.values))


def project_balls(w: np.ndarray, components: int) -> np.ndarray:
    """Scale every ``components``-vector of a flat array into the unit ball."""
    sites = w.reshape(-1, components)
    norms = np.linalg.norm(sites, axis=1, keepdims=True)
    return (sites / np.maximum(1.0, norms)).reshape(w.shape)


def project_ball_field(v: VectorFieldCube) -> VectorFieldCube:
    """Divide each site vector by ``max(1, ||v||)``."""
    return VectorFieldCube(v.spatial, v.scale, project_balls(v.values, v.components))


def default_mu(tube: Tube) -> float:
    """Smoothing parameter proportional to the RMS tube width."""
    rms = float(np.sqrt(np.mean(np.square(tube.width))))
    scale = config.solver.mu_scale
    return scale * rms if rms > 0 else scale


def point_result(problem: TvUlogProblem, solver_name: str, reported: Optional[float] = None) -> SolverResult:
    """Result for a tube whose feasible set is a single cube."""
    value = problem.tv(problem.lower) if reported is None else reported
    return SolverResult(
        minimizer=problem.tube.lower,
        objective=value,
        trace=[TracePoint(1, 0.0, value)],
        status=SolverStatus.CONVERGED,
        solver_name=solver_name,
        iterations=1,
    )
