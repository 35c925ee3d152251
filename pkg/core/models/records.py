"""Pydantic models for the JSON artifacts written by the pipeline."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class BlobRecord(BaseModel):
    """Detected scale-space blob."""
    index: List[int] = Field(..., description="Grid coordinates [i, j, k]")
    value: float = Field(..., description="Normalized Laplacian at the point")
    scale: float = Field(..., description="Scale t_k")
    radius: float = Field(..., ge=0, description="Blob radius sqrt(d * t_k)")
    on_scale_boundary: bool = Field(False, description="Minimum lies on the first or last scale")


class RegionRecord(BaseModel):
    """Extracted blob region."""
    minimizer: List[int] = Field(..., description="Grid coordinates of the deepest minimum")
    value: float = Field(..., description="Value at the minimizer")
    threshold_value: float = Field(..., description="Threshold defining the region")
    scale_range: List[float] = Field(..., min_length=2, max_length=2, description="Smallest and largest scale in the region")
    on_scale_boundary: bool = Field(False)
    voxels: List[List[int]] = Field(..., description="Region voxels [i, j, k]")


class RegionsDocument(BaseModel):
    r: float = Field(..., gt=0, lt=1)
    dark: bool = False
    regions: List[RegionRecord] = Field(default_factory=list)


class BlobsDocument(BaseModel):
    source: str = Field(..., description="Cube the blobs were detected on")
    dark: bool = False
    blobs: List[BlobRecord] = Field(default_factory=list)


class TubeSidecar(BaseModel):
    """Bookkeeping of a credible tube search."""
    alpha: float = Field(..., gt=0, lt=1)
    S: int = Field(..., ge=2)
    S_alpha: int = Field(..., ge=1)
    containment: int = Field(..., ge=0)
    bisect_steps: int = Field(..., ge=0)
    spanned: Optional[int] = Field(None, description="Number of density-ordered samples spanning the tube")
    volume: Optional[float] = Field(None, description="Sum of the tube widths")


class SolveRecord(BaseModel):
    """Outcome of one solver run; a failed run carries no objective."""
    solver: str
    status: str
    objective: Optional[float] = None
    iterations: int = Field(..., ge=0)
    seconds: Optional[float] = Field(None, ge=0, description="Wall-clock seconds, recorded for bench runs only")
    mu: Optional[float] = None
    gap: Optional[float] = None


class TimingsDocument(BaseModel):
    """Wall-clock data of a command, kept apart from the reproducible artifacts."""
    stages: Dict[str, float] = Field(default_factory=dict, description="Seconds per pipeline stage")
    trace: List[List[float]] = Field(default_factory=list, description="Solver trace rows [iter, seconds]")


class RunSummary(BaseModel):
    """Summary of a command invocation."""
    command: str
    experiment: Optional[Dict[str, Any]] = None
    solve: Optional[SolveRecord] = None
    tube: Optional[TubeSidecar] = None
    region_count: Optional[int] = None
    point_blob_count: Optional[int] = None
    bench: List[SolveRecord] = Field(default_factory=list)
    artifacts: List[str] = Field(default_factory=list)
