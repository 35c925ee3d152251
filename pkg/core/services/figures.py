"""SVG figures of pipeline results, rendered with matplotlib's Agg/SVG backend."""

from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from core.services.blobs import BlobPoint, BlobRegion, project_centers, project_circles  # noqa: E402
from core.services.scalespace import SpatialGrid  # noqa: E402

PathLike = Union[str, Path]

# Fixed salt and no timestamp keep the SVG output byte-identical across runs
matplotlib.rcParams["svg.hashsalt"] = "tvulog"
matplotlib.rcParams["svg.fonttype"] = "none"


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def _runs(mask: np.ndarray):
    """Start and stop indices of the True runs of a 1-D mask."""
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return list(zip(edges[0::2], edges[1::2]))


def plot_signal_regions(
    path: PathLike,
    spatial: SpatialGrid,
    estimate: np.ndarray,
    regions: Sequence[BlobRegion],
    ground_truth: Optional[np.ndarray] = None,
    point_blobs: Sequence[BlobPoint] = (),
) -> Path:
    """
    1-D figure: signal curves with one horizontal bar per region.

    The solid bar is the center projection, the thin bar the extent
    projection; point-estimate blobs are drawn as intervals below.
    """
    x = np.arange(spatial.n1) * spatial.h1
    fig, ax = plt.subplots(figsize=(8, 4))
    if ground_truth is not None:
        ax.plot(x, np.ravel(ground_truth), color="black", linestyle="--", linewidth=1, label="ground truth")
    ax.plot(x, np.ravel(estimate), color="tab:blue", linewidth=1.5, label="estimate")

    top = float(np.max(np.ravel(estimate))) if np.size(estimate) else 1.0
    step = 0.06 * max(abs(top), 1e-12)
    for level, region in enumerate(regions):
        y = top + step * (level + 1)
        for start, stop in _runs(project_circles(region)[:, 0]):
            ax.plot([x[start], x[stop - 1]], [y, y], color="tab:orange", linewidth=1)
        for start, stop in _runs(project_centers(region)[:, 0]):
            ax.plot([x[start], x[stop - 1]], [y, y], color="tab:orange", linewidth=4, solid_capstyle="butt")
    for level, blob in enumerate(point_blobs):
        y = -step * (level + 1)
        center = blob.index[0] * spatial.h1
        ax.plot([center - blob.radius, center + blob.radius], [y, y], color="tab:green", linewidth=1)
        ax.plot([center], [y], marker="|", color="tab:green")
    ax.set_xlabel("x")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def plot_image_regions(
    path: PathLike,
    spatial: SpatialGrid,
    image: np.ndarray,
    regions: Sequence[BlobRegion],
    point_blobs: Sequence[BlobPoint] = (),
) -> Path:
    """2-D figure: image with solid center and dashed extent contours per region."""
    image = np.asarray(image).reshape(spatial.shape)
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(image, cmap="gray", origin="upper", interpolation="nearest")
    for region in regions:
        ax.contour(project_circles(region).astype(float), levels=[0.5], colors="tab:blue",
                   linestyles="dashed", linewidths=1)
        ax.contour(project_centers(region).astype(float), levels=[0.5], colors="tab:blue",
                   linestyles="solid", linewidths=1.5)
    for blob in point_blobs:
        i, j = blob.center
        ax.add_patch(Circle((j, i), blob.radius / spatial.h1, color="tab:red", fill=False, linewidth=1))
    ax.set_axis_off()
    return _save(fig, path)


def plot_bench(path: PathLike, traces: Dict[str, Sequence[tuple]]) -> Path:
    """Normalized objective against time for every bench run (log scale)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, points in traces.items():
        if not points:
            continue
        seconds = [p[0] for p in points]
        values = [max(p[1], 1e-16) for p in points]
        ax.plot(seconds, values, label=name, linewidth=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("seconds")
    ax.set_ylabel("normalized objective")
    ax.legend(fontsize="small")
    return _save(fig, path)
