"""
Blob detection in scale space.

Classic detection reports local minima of the scale-normalized Laplacian.
Region extraction thresholds a cube relative to each negative minimum and
keeps the face-connected component around it; regions are projected back
to the image domain as a center mask and an extent mask.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from core.exceptions import InvalidArgumentError
from core.monitoring.logger import get_logger
from core.services.scalespace import ScaleGrid, ScaleSpaceCube, SpatialGrid, normalized_laplacian

logger = get_logger(__name__)

Index = Tuple[int, int, int]

FULL_NEIGHBORHOOD = ndimage.generate_binary_structure(3, 3)
FACE_NEIGHBORHOOD = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class BlobPoint:
    """Scale-space point with its Laplacian value and blob radius."""
    index: Index
    value: float
    scale: float
    radius: float
    on_scale_boundary: bool = False

    @property
    def center(self) -> Tuple[int, int]:
        return self.index[0], self.index[1]


@dataclass(frozen=True, eq=False)
class BlobRegion:
    """Face-connected voxel set around a local minimum plateau."""
    voxels: np.ndarray
    minimizer: BlobPoint
    threshold_value: float
    spatial: SpatialGrid
    scale: ScaleGrid
    dark: bool = False

    @property
    def size(self) -> int:
        return len(self.voxels)

    def voxel_set(self) -> set:
        return {tuple(int(c) for c in v) for v in self.voxels}

    def mask(self) -> np.ndarray:
        out = np.zeros((self.spatial.n1, self.spatial.n2, self.scale.K), dtype=bool)
        out[tuple(self.voxels.T)] = True
        return out

    def scale_range(self) -> Tuple[float, float]:
        ks = self.voxels[:, 2]
        return float(self.scale.scales[ks.min()]), float(self.scale.scales[ks.max()])


@dataclass(frozen=True, eq=False)
class ProjectedRegion:
    """Image-domain masks of a region: possible centers and union of blob discs."""
    center_mask: np.ndarray
    extent_mask: np.ndarray


def blob_radius(t: float, dims: int) -> float:
    return float(np.sqrt(dims * t))


# =============================================================================
# Local minima and LoG detection
# =============================================================================


def _local_minima(values: np.ndarray) -> List[Index]:
    """Plateau-deduplicated local minima of a ``(N1, N2, K)`` array."""
    lowest = ndimage.minimum_filter(values, footprint=FULL_NEIGHBORHOOD, mode="constant", cval=np.inf)
    candidates = values == lowest
    # Adjacent candidates are necessarily equal, so each label is one plateau
    labels, count = ndimage.label(candidates, structure=FULL_NEIGHBORHOOD)
    if count == 0:
        return []
    coords = np.argwhere(candidates)
    owner = labels[tuple(coords.T)]
    _, first = np.unique(owner, return_index=True)
    return sorted(tuple(int(c) for c in coords[i]) for i in first)


def local_minima(a: ScaleSpaceCube) -> List[Index]:
    """
    Indices no larger than any of their (up to 26) neighbors.

    Each plateau of equal values is reported once, at its lexicographically
    smallest index.
    """
    return _local_minima(a.values)


def _signed(a: ScaleSpaceCube, dark: bool) -> Tuple[np.ndarray, float]:
    sign = -1.0 if dark else 1.0
    return sign * a.values, sign


def _blob_point(a: ScaleSpaceCube, index: Index) -> BlobPoint:
    t = float(a.scale.scales[index[2]])
    return BlobPoint(
        index=index,
        value=float(a.values[index]),
        scale=t,
        radius=blob_radius(t, a.spatial.dims),
        on_scale_boundary=index[2] in (0, a.scale.K - 1),
    )


def detect_log_blobs(u: ScaleSpaceCube, dark: bool = False) -> List[BlobPoint]:
    """
    Local minima of the normalized Laplacian with negative value (bright blobs),
    or positive local maxima for ``dark=True``; ordered by depth.
    """
    lap = normalized_laplacian(u)
    work, _ = _signed(lap, dark)
    points = [_blob_point(lap, idx) for idx in _local_minima(work) if work[idx] < 0]
    points.sort(key=lambda p: (-abs(p.value), p.index))
    boundary = sum(p.on_scale_boundary for p in points)
    logger.debug("LoG detection finished", blobs=len(points), on_scale_boundary=boundary, dark=dark)
    return points


def ulog_blobs(minimizer: ScaleSpaceCube, dark: bool = False) -> List[BlobPoint]:
    """Blobs of the quadratic ULoG minimizer, drawn as discs of the blob radius."""
    return detect_log_blobs(minimizer, dark=dark)


# =============================================================================
# Region extraction
# =============================================================================


def extract_regions(a: ScaleSpaceCube, r: Optional[float] = None, dark: bool = False) -> List[BlobRegion]:
    """
    Blob regions of a cube by relative thresholding.

    For each negative local minimum ``a_min`` the region is the face-connected
    component of ``{a <= r * a_min}`` containing it. Minima are visited from
    the deepest; a component meeting earlier regions is merged with them
    (union, deepest minimizer, largest threshold).

    Args:
        a: Cube to analyse, usually the normalized Laplacian of a minimizer
        r: Relative threshold in (0, 1) (default 0.5)
        dark: Threshold ``-a`` instead, i.e. look at positive maxima

    Returns:
        Pairwise disjoint regions sorted by minimizer depth
    """
    r = 0.5 if r is None else r
    if not (0.0 < r < 1.0):
        raise InvalidArgumentError(f"r must lie in (0, 1), got {r}")
    work, sign = _signed(a, dark)

    minima = [idx for idx in _local_minima(work) if work[idx] < 0]
    minima.sort(key=lambda idx: (work[idx], idx))

    owner = np.zeros(work.shape, dtype=np.int64)  # 0 = unassigned, else region id
    regions = {}
    next_id = 1
    for idx in minima:
        threshold = r * work[idx]
        labels, _ = ndimage.label(work <= threshold, structure=FACE_NEIGHBORHOOD)
        component = labels == labels[idx]
        touched = set(np.unique(owner[component]).tolist()) - {0}
        if touched:
            keep = min(touched)
            for other in touched - {keep}:
                owner[owner == other] = keep
                regions.pop(other)
            owner[component] = keep
            deepest, old_threshold = regions[keep]
            regions[keep] = (deepest, max(old_threshold, threshold))
        else:
            owner[component] = next_id
            regions[next_id] = (idx, threshold)
            next_id += 1

    result = []
    for region_id, (deepest, threshold) in regions.items():
        voxels = np.argwhere(owner == region_id)
        point = _blob_point(a, deepest)
        result.append(BlobRegion(
            voxels=voxels,
            minimizer=point,
            threshold_value=float(sign * threshold),
            spatial=a.spatial,
            scale=a.scale,
            dark=dark,
        ))
    result.sort(key=lambda reg: (sign * reg.minimizer.value, reg.minimizer.index))
    logger.debug("Region extraction finished", minima=len(minima), regions=len(result), r=r, dark=dark)
    return result


def regions_overlap(first: BlobRegion, second: BlobRegion) -> bool:
    """True when two regions share a voxel. Regions from one extraction never do."""
    return bool(first.voxel_set() & second.voxel_set())


# =============================================================================
# Projections
# =============================================================================


def project_centers(region: BlobRegion) -> np.ndarray:
    """Pixels ``(i, j)`` with some ``(i, j, k)`` in the region."""
    return region.mask().any(axis=2)


def disc_footprint(spatial: SpatialGrid, radius_squared: float) -> np.ndarray:
    """Boolean footprint ``{h1^2 di^2 + h2^2 dj^2 <= radius^2}``."""
    reach_i = int(np.floor(np.sqrt(radius_squared) / spatial.h1))
    reach_j = int(np.floor(np.sqrt(radius_squared) / spatial.h2)) if spatial.dims == 2 else 0
    di = np.arange(-reach_i, reach_i + 1)[:, None] * spatial.h1
    dj = np.arange(-reach_j, reach_j + 1)[None, :] * spatial.h2
    return di * di + dj * dj <= radius_squared * (1.0 + 1e-12)


def project_circles(region: BlobRegion, spatial: Optional[SpatialGrid] = None) -> np.ndarray:
    """Union over region voxels of discs (intervals for 1-D) of the blob radius."""
    spatial = region.spatial if spatial is None else spatial
    mask = region.mask()
    out = np.zeros((spatial.n1, spatial.n2), dtype=bool)
    for k in np.unique(region.voxels[:, 2]):
        radius_squared = spatial.dims * float(region.scale.scales[k])
        footprint = disc_footprint(spatial, radius_squared)
        out |= ndimage.binary_dilation(mask[:, :, k], structure=footprint)
    return out


def project_region(region: BlobRegion) -> ProjectedRegion:
    return ProjectedRegion(center_mask=project_centers(region), extent_mask=project_circles(region))
