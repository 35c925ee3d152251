"""
Reading and writing pipeline artifacts.

Binary formats are little-endian:

* ``TVUC`` cube: magic, u32 version, u32 d, u32 N1, u32 N2, u32 K,
  f64 h1, f64 h2, f64 scales[K], f64 values[N1*N2*K] in row-major order.
* ``TVSS`` sample set: magic, u32 version, u32 d, u32 N1, u32 N2, u64 S,
  u64 seed, f64 h1, f64 h2, f64 log_densities[S], f64 samples[S*N1*N2].

JSON documents are pydantic models; traces are CSV tables. Wall-clock data
is written only to ``timings.json`` so every other artifact of a seeded run
is bitwise reproducible.
"""

import struct
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from core.exceptions import ArtifactFormatError
from core.models.records import BlobRecord, RegionRecord, TimingsDocument
from core.services.bayes import SampleSet
from core.services.blobs import BlobPoint, BlobRegion
from core.services.scalespace import ScaleGrid, ScaleSpaceCube, SpatialGrid, Tube
from core.services.solvers.problem import TracePoint

PathLike = Union[str, Path]
Model = TypeVar("Model", bound=BaseModel)

FORMAT_VERSION = 1
CUBE_MAGIC = b"TVUC"
SAMPLES_MAGIC = b"TVSS"
CUBE_HEADER = struct.Struct("<4sIIIIIdd")
SAMPLES_HEADER = struct.Struct("<4sIIIIQQdd")


def _spatial_header(spatial: SpatialGrid) -> Tuple[int, int, int, float, float]:
    return spatial.dims, spatial.n1, spatial.n2, spatial.h1, spatial.h2


def _spatial_from_header(d: int, n1: int, n2: int, h1: float, h2: float, path) -> SpatialGrid:
    if d == 1 and n2 == 1:
        return SpatialGrid.line(n1, h1)
    if d == 2:
        return SpatialGrid.image(n1, n2, h1, h2)
    raise ArtifactFormatError(f"unsupported grid header d={d}, N2={n2}", path=str(path))


def _float_block(data: bytes, offset: int, count: int, path) -> np.ndarray:
    end = offset + 8 * count
    if len(data) < end:
        raise ArtifactFormatError("file is truncated", path=str(path))
    return np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)


def _read_bytes(path: PathLike, magic: bytes, header: struct.Struct) -> Tuple[bytes, tuple]:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ArtifactFormatError(f"cannot read file: {e}", path=str(path))
    if len(data) < header.size:
        raise ArtifactFormatError("file is shorter than its header", path=str(path))
    fields = header.unpack_from(data)
    if fields[0] != magic:
        raise ArtifactFormatError(f"bad magic {fields[0]!r}, expected {magic!r}", path=str(path))
    if fields[1] != FORMAT_VERSION:
        raise ArtifactFormatError(f"unsupported version {fields[1]}", path=str(path))
    return data, fields


# =============================================================================
# Cubes and tubes
# =============================================================================


def write_cube(path: PathLike, cube: ScaleSpaceCube) -> Path:
    path = Path(path)
    d, n1, n2, h1, h2 = _spatial_header(cube.spatial)
    with path.open("wb") as fh:
        fh.write(CUBE_HEADER.pack(CUBE_MAGIC, FORMAT_VERSION, d, n1, n2, cube.scale.K, h1, h2))
        fh.write(cube.scale.as_array().astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(cube.values).astype("<f8").tobytes())
    return path


def read_cube(path: PathLike) -> ScaleSpaceCube:
    data, (_, _, d, n1, n2, K, h1, h2) = _read_bytes(path, CUBE_MAGIC, CUBE_HEADER)
    spatial = _spatial_from_header(d, n1, n2, h1, h2, path)
    offset = CUBE_HEADER.size
    scales = _float_block(data, offset, K, path)
    count = n1 * n2 * K
    values = _float_block(data, offset + 8 * K, count, path)
    if len(data) != offset + 8 * (K + count):
        raise ArtifactFormatError("trailing bytes after cube values", path=str(path))
    try:
        return ScaleSpaceCube(spatial, ScaleGrid(tuple(scales.tolist())), values.reshape(n1, n2, K))
    except Exception as e:
        raise ArtifactFormatError(f"invalid cube content: {e}", path=str(path))


def write_tube(directory: PathLike, tube: Tube, stem: str = "tube") -> Tuple[Path, Path]:
    directory = Path(directory)
    return (write_cube(directory / f"{stem}_lower.tvuc", tube.lower),
            write_cube(directory / f"{stem}_upper.tvuc", tube.upper))


def read_tube(lower_path: PathLike, upper_path: PathLike) -> Tube:
    lower, upper = read_cube(lower_path), read_cube(upper_path)
    try:
        return Tube(lower, upper)
    except Exception as e:
        raise ArtifactFormatError(f"files do not form a tube: {e}", path=str(lower_path))


# =============================================================================
# Sample sets
# =============================================================================


def write_samples(path: PathLike, sample_set: SampleSet, spatial: SpatialGrid) -> Path:
    path = Path(path)
    d, n1, n2, h1, h2 = _spatial_header(spatial)
    with path.open("wb") as fh:
        fh.write(SAMPLES_HEADER.pack(SAMPLES_MAGIC, FORMAT_VERSION, d, n1, n2,
                                     sample_set.size, sample_set.seed, h1, h2))
        fh.write(sample_set.log_densities.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(sample_set.samples).astype("<f8").tobytes())
    return path


def read_samples(path: PathLike) -> Tuple[SampleSet, SpatialGrid]:
    data, (_, _, d, n1, n2, S, seed, h1, h2) = _read_bytes(path, SAMPLES_MAGIC, SAMPLES_HEADER)
    spatial = _spatial_from_header(d, n1, n2, h1, h2, path)
    offset = SAMPLES_HEADER.size
    log_densities = _float_block(data, offset, S, path)
    samples = _float_block(data, offset + 8 * S, S * spatial.size, path)
    if len(data) != offset + 8 * S * (1 + spatial.size):
        raise ArtifactFormatError("trailing bytes after samples", path=str(path))
    try:
        sample_set = SampleSet(samples.reshape(S, spatial.size), log_densities, int(seed))
    except Exception as e:
        raise ArtifactFormatError(f"invalid sample content: {e}", path=str(path))
    return sample_set, spatial


# =============================================================================
# JSON, CSV and PBM
# =============================================================================


def write_model(path: PathLike, model: BaseModel) -> Path:
    path = Path(path)
    path.write_text(model.model_dump_json(indent=2) + "\n")
    return path


def read_model(path: PathLike, model_type: Type[Model]) -> Model:
    try:
        return model_type.model_validate_json(Path(path).read_text())
    except (OSError, ValidationError) as e:
        raise ArtifactFormatError(f"cannot parse {model_type.__name__}: {e}", path=str(path))


def blob_record(point: BlobPoint) -> BlobRecord:
    return BlobRecord(
        index=list(point.index),
        value=point.value,
        scale=point.scale,
        radius=point.radius,
        on_scale_boundary=point.on_scale_boundary,
    )


def region_record(region: BlobRegion) -> RegionRecord:
    return RegionRecord(
        minimizer=list(region.minimizer.index),
        value=region.minimizer.value,
        threshold_value=region.threshold_value,
        scale_range=list(region.scale_range()),
        on_scale_boundary=region.minimizer.on_scale_boundary,
        voxels=region.voxels.tolist(),
    )


def trace_frame(trace: Sequence[TracePoint]) -> pd.DataFrame:
    """Reproducible part of a trace; wall-clock seconds go to ``timings_document``."""
    return pd.DataFrame(
        {
            "iter": [p.iteration for p in trace],
            "objective": [p.objective for p in trace],
        },
        columns=["iter", "objective"],
    )


def write_trace(path: PathLike, trace: Sequence[TracePoint]) -> Path:
    path = Path(path)
    trace_frame(trace).to_csv(path, index=False)
    return path


def timings_document(stages: Dict[str, float], trace: Sequence[TracePoint] = ()) -> TimingsDocument:
    return TimingsDocument(stages=dict(stages), trace=[[p.iteration, p.seconds] for p in trace])


def read_trace(path: PathLike, timings: Optional[TimingsDocument] = None) -> List[TracePoint]:
    """
    Trace rows of ``trace.csv``. Seconds are joined from ``timings`` by
    iteration and are 0.0 without it.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactFormatError(f"cannot parse trace: {e}", path=str(path))
    if list(frame.columns) != ["iter", "objective"]:
        raise ArtifactFormatError("unexpected trace columns", path=str(path))
    seconds = {int(i): float(s) for i, s in timings.trace} if timings is not None else {}
    return [TracePoint(int(i), seconds.get(int(i), 0.0), float(o)) for i, o in frame.itertuples(index=False)]


def write_pbm(path: PathLike, mask: np.ndarray) -> Path:
    """Plain PBM; 1-D masks of shape ``(N, 1)`` are written as one row."""
    path = Path(path)
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 2 and mask.shape[1] == 1:
        mask = mask.T
    rows = ["".join("1" if v else "0" for v in row) for row in mask]
    height, width = mask.shape
    path.write_text(f"P1\n{width} {height}\n" + "\n".join(rows) + "\n")
    return path


def read_pbm(path: PathLike) -> np.ndarray:
    """Inverse of ``write_pbm`` (one-row images come back as ``(N, 1)``)."""
    try:
        tokens = [line.split("#", 1)[0] for line in Path(path).read_text().splitlines()]
    except OSError as e:
        raise ArtifactFormatError(f"cannot read file: {e}", path=str(path))
    text = " ".join(tokens).split()
    if not text or text[0] != "P1" or len(text) < 3:
        raise ArtifactFormatError("not a plain PBM file", path=str(path))
    width, height = int(text[1]), int(text[2])
    bits = "".join(text[3:])
    if len(bits) != width * height or set(bits) - {"0", "1"}:
        raise ArtifactFormatError("PBM pixel data does not match its size", path=str(path))
    mask = np.array([c == "1" for c in bits], dtype=bool).reshape(height, width)
    return mask.T if height == 1 else mask
