"""
Discrete Gaussian scale space and scale-normalized differential operators.

Cubes are stored as arrays of shape ``(N1, N2, K)``. One-dimensional signals
use ``N2 = 1`` and drop the x2 gradient component, so the row-major
enumeration ``((i * N2) + j) * K + k`` is shared by every dimension.

The differential operators are assembled once per pair of grids as sparse
matrices; adjoints are exact transposes of the same matrices.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.ndimage import gaussian_filter1d

from core.config.settings import config
from core.exceptions import DimensionMismatchError, InvalidArgumentError
from core.monitoring.logger import get_logger

logger = get_logger(__name__)


# =============================================================================
# Grids
# =============================================================================


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform spatial grid with one or two axes."""
    sizes: Tuple[int, ...]
    steps: Tuple[float, ...] = ()

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        steps = tuple(float(h) for h in self.steps) or (1.0,) * len(sizes)
        if len(sizes) not in (1, 2):
            raise InvalidArgumentError(f"spatial grid must have 1 or 2 axes, got {len(sizes)}")
        if len(steps) != len(sizes):
            raise InvalidArgumentError("one step per spatial axis is required",
                                       detail={"sizes": sizes, "steps": steps})
        if any(n < 3 for n in sizes):
            raise InvalidArgumentError(f"grid sizes must be >= 3, got {sizes}")
        if any(not (h > 0 and math.isfinite(h)) for h in steps):
            raise InvalidArgumentError(f"grid steps must be positive, got {steps}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def line(cls, n: int, h: float = 1.0) -> "SpatialGrid":
        return cls((n,), (h,))

    @classmethod
    def image(cls, n1: int, n2: int, h1: float = 1.0, h2: float = 1.0) -> "SpatialGrid":
        return cls((n1, n2), (h1, h2))

    @property
    def dims(self) -> int:
        return len(self.sizes)

    @property
    def n1(self) -> int:
        return self.sizes[0]

    @property
    def n2(self) -> int:
        return self.sizes[1] if self.dims == 2 else 1

    @property
    def h1(self) -> float:
        return self.steps[0]

    @property
    def h2(self) -> float:
        return self.steps[1] if self.dims == 2 else 1.0

    @property
    def shape(self) -> Tuple[int, int]:
        """Storage shape of one image, ``(N1, N2)``."""
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2


@dataclass(frozen=True)
class ScaleGrid:
    """Exponentially increasing scales ``t_{k+1} = b * t_k``."""
    scales: Tuple[float, ...]

    def __post_init__(self):
        scales = tuple(float(t) for t in self.scales)
        if len(scales) < 2:
            raise InvalidArgumentError(f"at least two scales are required, got {len(scales)}")
        arr = np.asarray(scales)
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise InvalidArgumentError("scales must be positive and finite")
        if np.any(np.diff(arr) <= 0):
            raise InvalidArgumentError("scales must be strictly increasing")
        ratios = arr[1:] / arr[:-1]
        if not np.allclose(ratios, ratios[0], rtol=1e-10, atol=0.0):
            raise InvalidArgumentError("scales must form a geometric sequence",
                                       detail={"ratios": ratios.tolist()})
        object.__setattr__(self, "scales", scales)

    @property
    def K(self) -> int:
        return len(self.scales)

    @property
    def ratio(self) -> float:
        """The common ratio b > 1."""
        return (self.scales[-1] / self.scales[0]) ** (1.0 / (self.K - 1))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scales, dtype=np.float64)


def make_scale_grid(t_min: float, t_max: float, K: int) -> ScaleGrid:
    """
    Build K exponentially increasing scales between t_min and t_max.

    Args:
        t_min: Smallest scale (variance, length^2)
        t_max: Largest scale
        K: Number of scales, at least 2

    Returns:
        ScaleGrid with t_k = b^(k-1) t_min and b = (t_max/t_min)^(1/(K-1))
    """
    if K < 2:
        raise InvalidArgumentError(f"K must be >= 2, got {K}")
    if not (0 < t_min < t_max):
        raise InvalidArgumentError(f"need 0 < t_min < t_max, got t_min={t_min}, t_max={t_max}")
    b = (t_max / t_min) ** (1.0 / (K - 1))
    scales = t_min * b ** np.arange(K, dtype=np.float64)
    scales[0] = t_min
    scales[-1] = t_max
    return ScaleGrid(tuple(scales.tolist()))


# =============================================================================
# Cubes
# =============================================================================


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScaleSpaceCube:
    """Values on spatial grid x scale grid, shape ``(N1, N2, K)``."""
    spatial: SpatialGrid
    scale: ScaleGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = (self.spatial.n1, self.spatial.n2, self.scale.K)
        if values.shape != expected:
            if values.size != math.prod(expected):
                raise DimensionMismatchError("cube values do not fit the grids",
                                             expected=expected, actual=values.shape)
            values = values.reshape(expected)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("cube values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.values.shape

    @property
    def grids(self) -> Tuple[SpatialGrid, ScaleGrid]:
        return (self.spatial, self.scale)

    def same_grids(self, other) -> bool:
        return self.spatial == other.spatial and self.scale == other.scale

    def with_values(self, values: np.ndarray) -> "ScaleSpaceCube":
        return ScaleSpaceCube(self.spatial, self.scale, values)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def constant(cls, spatial: SpatialGrid, scale: ScaleGrid, value: float = 0.0) -> "ScaleSpaceCube":
        return cls(spatial, scale, np.full((spatial.n1, spatial.n2, scale.K), float(value)))


@dataclass(frozen=True, eq=False)
class VectorFieldCube:
    """Stacked scale-normalized forward differences, shape ``(N1, N2, K, d+1)``."""
    spatial: SpatialGrid
    scale: ScaleGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = (self.spatial.n1, self.spatial.n2, self.scale.K, self.spatial.dims + 1)
        if values.shape != expected:
            if values.size != math.prod(expected):
                raise DimensionMismatchError("field values do not fit the grids",
                                             expected=expected, actual=values.shape)
            values = values.reshape(expected)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field values must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def components(self) -> int:
        return self.values.shape[-1]

    def site_norms(self) -> np.ndarray:
        """Euclidean norm of the (d+1)-vector at every site."""
        return np.linalg.norm(self.values, axis=-1)

    def same_grids(self, other) -> bool:
        return self.spatial == other.spatial and self.scale == other.scale

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True, eq=False)
class Tube:
    """Box ``[lower, upper]`` of scale-space cubes."""
    lower: ScaleSpaceCube
    upper: ScaleSpaceCube
    width: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lower.same_grids(self.upper):
            raise DimensionMismatchError("tube bounds live on different grids")
        if np.any(self.lower.values > self.upper.values):
            raise InvalidArgumentError("tube lower bound exceeds upper bound",
                                       detail={"violations": int(np.sum(self.lower.values > self.upper.values))})
        object.__setattr__(self, "width", _frozen(self.upper.values - self.lower.values))

    @property
    def spatial(self) -> SpatialGrid:
        return self.lower.spatial

    @property
    def scale(self) -> ScaleGrid:
        return self.lower.scale

    @property
    def volume(self) -> float:
        """Sum of the entrywise widths."""
        return float(self.width.sum())

    def is_point(self) -> bool:
        return not np.any(self.width > 0)

    def midpoint(self) -> ScaleSpaceCube:
        return self.lower.with_values(0.5 * (self.lower.values + self.upper.values))

    def contains(self, cube: ScaleSpaceCube, slack: float = 0.0) -> bool:
        if not cube.same_grids(self.lower):
            raise DimensionMismatchError("cube and tube live on different grids")
        return bool(np.all(cube.values >= self.lower.values - slack)
                    and np.all(cube.values <= self.upper.values + slack))


# =============================================================================
# Gaussian scale-space operator
# =============================================================================


def _as_images(images: np.ndarray, spatial: SpatialGrid) -> np.ndarray:
    """Reshape a batch of images to ``(B, N1, N2)``."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.size % spatial.size != 0 or arr.size == 0:
        raise DimensionMismatchError("image size does not match the spatial grid",
                                     expected=spatial.shape, actual=arr.shape)
    return arr.reshape((-1, spatial.n1, spatial.n2))


def _smooth(batch: np.ndarray, spatial: SpatialGrid, t: float, truncate: float) -> np.ndarray:
    """Convolve ``(B, N1, N2)`` images with a Gaussian of variance t (reflecting boundary)."""
    sigma = math.sqrt(t)
    radius = max(1, math.ceil(truncate * sigma))
    out = gaussian_filter1d(batch, sigma, axis=1, mode="reflect", radius=radius)
    if spatial.dims == 2:
        out = gaussian_filter1d(out, sigma, axis=2, mode="reflect", radius=radius)
    return out


def scale_space_batch(
    images: np.ndarray,
    spatial: SpatialGrid,
    scale: ScaleGrid,
    truncate: Optional[float] = None,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Scale-space representations of a batch of images.

    Args:
        images: Array holding B images of the spatial grid (any shape with B*N1*N2 entries)
        spatial: Spatial grid
        scale: Scale grid
        truncate: Kernel radius in standard deviations (default from config)
        threads: Worker threads over scale slices (default from config)

    Returns:
        Array of shape (B, N1, N2, K)
    """
    truncate = config.scalespace.kernel_truncate if truncate is None else truncate
    threads = config.threads if threads is None else threads
    batch = _as_images(images, spatial)
    if not np.all(np.isfinite(batch)):
        raise InvalidArgumentError("images must be finite")
    out = np.empty(batch.shape + (scale.K,), dtype=np.float64)

    def fill(k: int):
        out[..., k] = _smooth(batch, spatial, scale.scales[k], truncate)

    if threads > 1:
        # Each slice is written by exactly one worker
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(scale.K)))
    else:
        for k in range(scale.K):
            fill(k)
    return out


def gaussian_scale_space(
    image: np.ndarray,
    spatial: SpatialGrid,
    scale: ScaleGrid,
    truncate: Optional[float] = None,
) -> ScaleSpaceCube:
    """Scale-space representation ``u = Phi f`` of a single image."""
    batch = _as_images(image, spatial)
    if batch.shape[0] != 1:
        raise DimensionMismatchError("expected a single image", expected=spatial.shape,
                                     actual=np.shape(image))
    return ScaleSpaceCube(spatial, scale, scale_space_batch(batch, spatial, scale, truncate)[0])


# =============================================================================
# Sparse operator assembly
# =============================================================================


def second_difference(n: int, h: float) -> sp.csr_matrix:
    """Central second difference with mirrored boundary ``u_0 = u_2``."""
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return (sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / (h * h)).tocsr()


def forward_difference(n: int) -> sp.csr_matrix:
    """Forward difference with replicated last entry (last row zero)."""
    main = -np.ones(n)
    main[-1] = 0.0
    return sp.diags([main, np.ones(n - 1)], [0, 1], format="csr")


def lift_to_axis(op: sp.spmatrix, axis: int, shape: Sequence[int]) -> sp.csr_matrix:
    """Lift a 1-D operator to one axis of a C-ordered array of the given shape."""
    factors = [op if ax == axis else sp.identity(n, format="csr") for ax, n in enumerate(shape)]
    result = factors[0]
    for factor in factors[1:]:
        result = sp.kron(result, factor, format="csr")
    return result.tocsr()


class ScaleSpaceOperators:
    """Sparse matrices of the normalized Laplacian, gradient and ``A = grad o lap``."""

    def __init__(self, spatial: SpatialGrid, scale: ScaleGrid):
        self.spatial = spatial
        self.scale = scale
        shape = (spatial.n1, spatial.n2, scale.K)
        self.shape = shape
        self.size = math.prod(shape)
        self.components = spatial.dims + 1

        t = np.tile(scale.as_array(), spatial.size)
        steps = [spatial.h1, spatial.h2][:spatial.dims]

        second = lift_to_axis(second_difference(shape[0], steps[0]), 0, shape)
        if spatial.dims == 2:
            second = second + lift_to_axis(second_difference(shape[1], steps[1]), 1, shape)
        self.laplacian = (sp.diags(t) @ second).tocsr()

        root_t = sp.diags(np.sqrt(t))
        parts = [
            (root_t @ lift_to_axis(forward_difference(shape[axis]) / steps[axis], axis, shape)).tocsr()
            for axis in range(spatial.dims)
        ]
        parts.append(lift_to_axis(forward_difference(scale.K), 2, shape) / (scale.ratio - 1.0))
        stacked = sp.vstack(parts, format="csr")
        # Interleave: row sigma*(d+1) + r holds component r of site sigma
        perm = (np.arange(self.size)[:, None] + self.size * np.arange(self.components)[None, :]).ravel()
        self.gradient = stacked[perm].tocsr()

        self.A = (self.gradient @ self.laplacian).tocsr()
        self.A.eliminate_zeros()
        self.AT = self.A.T.tocsr()
        self.laplacian_T = self.laplacian.T.tocsr()

        logger.debug(
            "Assembled scale-space operators",
            shape=shape,
            nnz_laplacian=int(self.laplacian.nnz),
            nnz_A=int(self.A.nnz),
        )

    def apply_A(self, z: np.ndarray) -> np.ndarray:
        return self.A @ z

    def apply_AT(self, w: np.ndarray) -> np.ndarray:
        return self.AT @ w


@lru_cache(maxsize=16)
def operators_for(spatial: SpatialGrid, scale: ScaleGrid) -> ScaleSpaceOperators:
    """Cached operator assembly for a pair of grids."""
    return ScaleSpaceOperators(spatial, scale)


def _check_cube(u: ScaleSpaceCube) -> ScaleSpaceOperators:
    if not isinstance(u, ScaleSpaceCube):
        raise InvalidArgumentError(f"expected ScaleSpaceCube, got {type(u).__name__}")
    return operators_for(u.spatial, u.scale)


# =============================================================================
# Scale-normalized differential operators
# =============================================================================


def normalized_laplacian(u: ScaleSpaceCube) -> ScaleSpaceCube:
    """Scale-normalized Laplacian ``t_k * sum_axes D2 u`` with mirrored boundaries."""
    ops = _check_cube(u)
    return u.with_values((ops.laplacian @ u.flat()).reshape(u.shape))


def normalized_gradient(u: ScaleSpaceCube) -> VectorFieldCube:
    """Stacked scale-normalized forward differences (spatial axes first, scale last)."""
    ops = _check_cube(u)
    return VectorFieldCube(u.spatial, u.scale, ops.gradient @ u.flat())


def scale_normalized_tv(u: ScaleSpaceCube) -> float:
    """Isotropic scale-normalized total variation."""
    return float(normalized_gradient(u).site_norms().sum())


def apply_A(u: ScaleSpaceCube) -> VectorFieldCube:
    """``A u`` with ``A = grad o lap``."""
    ops = _check_cube(u)
    return VectorFieldCube(u.spatial, u.scale, ops.A @ u.flat())


def apply_A_adjoint(v: VectorFieldCube) -> ScaleSpaceCube:
    """``A^T v``."""
    if not isinstance(v, VectorFieldCube):
        raise InvalidArgumentError(f"expected VectorFieldCube, got {type(v).__name__}")
    ops = operators_for(v.spatial, v.scale)
    return ScaleSpaceCube(v.spatial, v.scale, ops.AT @ v.flat())


# =============================================================================
# Operator norms
# =============================================================================


def power_iteration(
    matvec: Callable[[np.ndarray], np.ndarray],
    rmatvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """
    Estimate the spectral norm of a linear map by power iteration on ``M^T M``.

    Returns:
        Estimated largest singular value (0.0 for the zero map)
    """
    tol = config.scalespace.power_iteration_tol if tol is None else tol
    max_iter = config.scalespace.power_iteration_max if max_iter is None else max_iter
    seed = config.scalespace.power_iteration_seed if seed is None else seed

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    eigenvalue = 0.0
    for iteration in range(1, max_iter + 1):
        y = rmatvec(matvec(x))
        estimate = float(np.linalg.norm(y))
        if estimate == 0.0:
            return 0.0
        x = y / estimate
        converged = abs(estimate - eigenvalue) <= tol * estimate
        eigenvalue = estimate
        if converged:
            break
    logger.debug("Power iteration finished", iterations=iteration, norm=math.sqrt(eigenvalue))
    return math.sqrt(eigenvalue)


@lru_cache(maxsize=16)
def operator_norm_estimate(spatial: SpatialGrid, scale: ScaleGrid) -> float:
    """Estimate of ``||A||_2`` for the given grids."""
    ops = operators_for(spatial, scale)
    return power_iteration(ops.apply_A, ops.apply_AT, ops.size)


@lru_cache(maxsize=16)
def laplacian_norm_estimate(spatial: SpatialGrid, scale: ScaleGrid) -> float:
    """Estimate of ``||lap||_2`` for the given grids."""
    ops = operators_for(spatial, scale)
    return power_iteration(lambda z: ops.laplacian @ z, lambda w: ops.laplacian_T @ w, ops.size)
