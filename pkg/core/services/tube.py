"""
Credible scale-space tubes from posterior samples.

Samples are ordered by descending posterior density. The first ``s`` ordered
samples span a tube; these tubes grow with ``s``, so the smallest one holding
at least ``ceil((1 - alpha) S)`` of all sample cubes is found by bisection
on ``s``.
"""

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core.config.settings import config
from core.exceptions import DimensionMismatchError, EmptyInputError, InvalidArgumentError
from core.monitoring.logger import get_logger, metrics
from core.services.bayes import SampleSet
from core.services.scalespace import (
    ScaleGrid,
    ScaleSpaceCube,
    SpatialGrid,
    Tube,
    scale_space_batch,
)

logger = get_logger(__name__)


# =============================================================================
# Elementary operations on cube lists
# =============================================================================


def scale_space_samples(sample_set: SampleSet, spatial: SpatialGrid, scale: ScaleGrid) -> List[ScaleSpaceCube]:
    """Scale-space representation of every sample."""
    if sample_set.dimension != spatial.size:
        raise DimensionMismatchError("sample dimension does not match the spatial grid",
                                     expected=spatial.size, actual=sample_set.dimension)
    cubes = scale_space_batch(sample_set.samples, spatial, scale)
    return [ScaleSpaceCube(spatial, scale, c) for c in cubes]


def _check_grids(cubes: Sequence[ScaleSpaceCube]):
    first = cubes[0]
    for cube in cubes[1:]:
        if not cube.same_grids(first):
            raise DimensionMismatchError("cubes live on different grids")


def span_tube(cubes: Sequence[ScaleSpaceCube]) -> Tube:
    """Smallest tube containing every cube (entrywise min and max)."""
    if len(cubes) == 0:
        raise EmptyInputError("span_tube needs at least one cube")
    _check_grids(cubes)
    stack = np.stack([c.values for c in cubes])
    first = cubes[0]
    return Tube(first.with_values(stack.min(axis=0)), first.with_values(stack.max(axis=0)))


def containment_count(cubes: Sequence[ScaleSpaceCube], tube: Tube) -> int:
    """Number of cubes lying entrywise inside the tube."""
    if len(cubes) == 0:
        return 0
    _check_grids(cubes)
    if not cubes[0].same_grids(tube.lower):
        raise DimensionMismatchError("cubes and tube live on different grids")
    stack = np.stack([c.values for c in cubes])
    return int(_inside(stack, tube.lower.values, tube.upper.values).sum())


def _inside(batch: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Per-cube containment flags for a ``(B, N1, N2, K)`` batch."""
    flat = batch.reshape(batch.shape[0], -1)
    return np.all((flat >= lower.reshape(-1)) & (flat <= upper.reshape(-1)), axis=1)


def density_order(log_densities: np.ndarray) -> np.ndarray:
    """Permutation sorting samples by descending density; ties keep index order."""
    return np.argsort(-np.asarray(log_densities), kind="stable")


def credible_sample_count(S: int, alpha: float) -> int:
    """``ceil((1 - alpha) S)``, clipped to ``[1, S]``."""
    # Guard the ceiling against products like 0.95 * 10000 = 9500.000000000002
    value = (1.0 - alpha) * S
    nearest = round(value)
    count = nearest if abs(value - nearest) <= 1e-9 * max(1.0, abs(value)) else math.ceil(value)
    return int(min(S, max(1, count)))


# =============================================================================
# Streaming access to ordered sample cubes
# =============================================================================


class OrderedCubes:
    """
    Scale-space cubes of a sample set, visited in density order.

    Cubes are held in memory when they fit into ``resident_limit_mb``;
    otherwise every pass recomputes them chunk by chunk.
    """

    def __init__(
        self,
        sample_set: SampleSet,
        spatial: SpatialGrid,
        scale: ScaleGrid,
        chunk: Optional[int] = None,
        resident_limit_mb: Optional[float] = None,
    ):
        if sample_set.dimension != spatial.size:
            raise DimensionMismatchError("sample dimension does not match the spatial grid",
                                         expected=spatial.size, actual=sample_set.dimension)
        self.samples = sample_set.samples
        self.spatial = spatial
        self.scale = scale
        self.order = density_order(sample_set.log_densities)
        self.chunk = config.tube.cube_chunk if chunk is None else chunk
        limit = config.tube.resident_limit_mb if resident_limit_mb is None else resident_limit_mb
        cube_bytes = 8 * spatial.size * scale.K
        self._resident: Optional[np.ndarray] = None
        if len(self.order) * cube_bytes <= limit * 1024 * 1024:
            self._resident = scale_space_batch(self.samples[self.order], spatial, scale)

    def __len__(self) -> int:
        return len(self.order)

    @property
    def resident(self) -> bool:
        return self._resident is not None

    def chunks(self, stop: Optional[int] = None) -> Iterator[np.ndarray]:
        """Batches of ordered cubes ``0 .. stop-1`` with shape ``(B, N1, N2, K)``."""
        stop = len(self) if stop is None else stop
        for start in range(0, stop, self.chunk):
            end = min(stop, start + self.chunk)
            if self._resident is not None:
                yield self._resident[start:end]
            else:
                yield scale_space_batch(self.samples[self.order[start:end]], self.spatial, self.scale)

    def span(self, s: int) -> Tuple[np.ndarray, np.ndarray]:
        """Bounds of the tube spanned by the first ``s`` ordered cubes."""
        lower = upper = None
        for batch in self.chunks(s):
            lo, hi = batch.min(axis=0), batch.max(axis=0)
            lower = lo if lower is None else np.minimum(lower, lo)
            upper = hi if upper is None else np.maximum(upper, hi)
        return lower, upper

    def count_inside(self, lower: np.ndarray, upper: np.ndarray) -> int:
        return int(sum(int(_inside(batch, lower, upper).sum()) for batch in self.chunks()))

    def tube(self, lower: np.ndarray, upper: np.ndarray) -> Tube:
        return Tube(ScaleSpaceCube(self.spatial, self.scale, lower),
                    ScaleSpaceCube(self.spatial, self.scale, upper))


# =============================================================================
# Credible tube
# =============================================================================


@dataclass(frozen=True)
class CredibleTubeEstimate:
    """Credible tube together with the bookkeeping of its search."""
    tube: Tube
    alpha: float
    S: int
    S_alpha: int
    spanned: int
    containment: int
    bisect_steps: int


def estimate_credible_tube(
    sample_set: SampleSet,
    spatial: SpatialGrid,
    scale: ScaleGrid,
    alpha: Optional[float] = None,
    max_bisect: Optional[int] = None,
    chunk: Optional[int] = None,
) -> CredibleTubeEstimate:
    """
    Search the nested family of density-ordered tubes for a credible one.

    The tube spanned by the first ``S_alpha`` ordered cubes always contains at
    least ``S_alpha`` cubes. Bisection on the spanned count ``s`` then looks
    for a smaller member that is still credible; midpoints are rounded down,
    an exact hit stops the search, and the smallest credible member seen is
    returned.

    Args:
        sample_set: Posterior samples with log densities
        spatial: Spatial grid of the samples
        scale: Scale grid of the tube
        alpha: Credibility parameter in (0, 1) (default from config)
        max_bisect: Maximum number of bisection steps (default from config)
        chunk: Cubes per streaming batch (default from config)

    Returns:
        CredibleTubeEstimate
    """
    alpha = config.tube.alpha if alpha is None else alpha
    max_bisect = config.tube.max_bisect if max_bisect is None else max_bisect
    if not (0.0 < alpha < 1.0):
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    if max_bisect < 0:
        raise InvalidArgumentError(f"max_bisect must be non-negative, got {max_bisect}")
    S = sample_set.size
    if S < 2:
        raise InvalidArgumentError(f"at least two samples are required, got {S}")

    with metrics.timer("tube_estimation"):
        cubes = OrderedCubes(sample_set, spatial, scale, chunk=chunk)
        S_alpha = credible_sample_count(S, alpha)

        best_s = S_alpha
        best_bounds = cubes.span(S_alpha)
        best_count = cubes.count_inside(*best_bounds)
        steps = 0
        logger.debug("Initial credible tube", S=S, S_alpha=S_alpha, containment=best_count)

        # Invariant: members with s <= low are not credible, s = high is
        low, high = 0, S_alpha
        while best_count != S_alpha and steps < max_bisect and high - low > 1:
            mid = (low + high) // 2
            bounds = cubes.span(mid)
            count = cubes.count_inside(*bounds)
            steps += 1
            if count >= S_alpha:
                high = mid
                best_s, best_bounds, best_count = mid, bounds, count
            else:
                low = mid

    estimate = CredibleTubeEstimate(
        tube=cubes.tube(*best_bounds),
        alpha=float(alpha),
        S=S,
        S_alpha=S_alpha,
        spanned=best_s,
        containment=best_count,
        bisect_steps=steps,
    )
    logger.info(
        "Credible tube estimated",
        S=S,
        S_alpha=S_alpha,
        spanned=best_s,
        containment=best_count,
        bisect_steps=steps,
        volume=round(estimate.tube.volume, 6),
    )
    return estimate


def credible_tube(
    sample_set: SampleSet,
    spatial: SpatialGrid,
    scale: ScaleGrid,
    alpha: Optional[float] = None,
    max_bisect: Optional[int] = None,
) -> Tube:
    """Credible scale-space tube; see ``estimate_credible_tube``."""
    return estimate_credible_tube(sample_set, spatial, scale, alpha, max_bisect).tube
