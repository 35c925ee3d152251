"""Pydantic models for experiment documents.

An experiment document is a JSON object read by the demo and bench
commands. Keys left out fall back to the defaults of the 1-D or 2-D demo.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.config.settings import config
from core.exceptions import ConfigurationError


class GroundTruthBump(BaseModel):
    """Gaussian bump ``amplitude * exp(-|x - center|^2 / (2 variance))``."""
    model_config = ConfigDict(extra="forbid")

    center: List[float] = Field(..., min_length=1, max_length=2, description="Center in grid cells")
    variance: float = Field(..., gt=0, description="Variance in squared grid cells")
    amplitude: float = Field(1.0, description="Peak height")


DEFAULT_BUMPS_1D = [
    GroundTruthBump(center=[45.0], variance=25.0, amplitude=1.0),
    GroundTruthBump(center=[100.0], variance=16.0, amplitude=0.8),
    GroundTruthBump(center=[155.0], variance=36.0, amplitude=1.0),
]

DEFAULT_BUMPS_2D = [
    GroundTruthBump(center=[15.0, 16.0], variance=9.0, amplitude=1.0),
    GroundTruthBump(center=[34.0, 33.0], variance=16.0, amplitude=1.0),
]


class ExperimentConfig(BaseModel):
    """Model, sampling, tube, solver and extraction parameters of one run."""
    model_config = ConfigDict(extra="forbid")

    dims: Literal[1, 2] = Field(1, description="Number of spatial dimensions")
    n: int = Field(200, ge=3, description="Grid size N1")
    n2: Optional[int] = Field(None, ge=3, description="Grid size N2 (2-D only)")
    h: float = Field(1.0, gt=0, description="Grid step")
    kernel_std: float = Field(2.0, gt=0, description="Blur kernel standard deviation in cells")
    gamma: float = Field(0.03, gt=0, description="Noise standard deviation")
    tau: float = Field(1.0, gt=0, description="Prior precision scale")
    eps: float = Field(1e-2, gt=0, description="Prior identity weight")
    seed: int = Field(1, ge=0, description="Seed of data simulation and sampling")
    S: int = Field(10000, ge=2, description="Number of posterior samples")
    alpha: float = Field(0.05, gt=0, lt=1, description="Credibility parameter")
    max_bisect: int = Field(20, ge=0, description="Bisection steps of the tube search")
    t_min: float = Field(1.0, gt=0, description="Smallest scale")
    t_max: float = Field(70.0 ** 2, gt=0, description="Largest scale")
    K: int = Field(30, ge=2, description="Number of scales")
    ground_truth: List[GroundTruthBump] = Field(default_factory=lambda: list(DEFAULT_BUMPS_1D))
    solver: str = Field(default_factory=lambda: config.solver.default_solver, description="Solver backend")
    mu: Optional[float] = Field(None, gt=0, description="Smoothing parameter; default scales with the tube width")
    tol: Optional[float] = Field(None, gt=0, description="Solver tolerance")
    max_iters: Optional[int] = Field(None, ge=1, description="Solver iteration cap")
    r: float = Field(0.5, gt=0, lt=1, description="Relative extraction threshold")
    dark: bool = Field(False, description="Detect dark instead of bright blobs")
    solvers: List[str] = Field(
        default_factory=lambda: ["socp", "dual-smoothing", "primal-smoothing"],
        description="Backends compared by the bench command",
    )
    mus: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3], description="Smoothing parameters swept by bench")

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be smaller than t_max")
        if self.dims == 2 and self.n2 is None:
            self.n2 = self.n
        if self.dims == 1 and self.n2 is not None:
            raise ValueError("n2 is only valid for dims = 2")
        for bump in self.ground_truth:
            if len(bump.center) != self.dims:
                raise ValueError("ground-truth centers must have one coordinate per dimension")
        if any(mu <= 0 for mu in self.mus):
            raise ValueError("mus must be positive")
        return self

    @property
    def sizes(self) -> List[int]:
        return [self.n] if self.dims == 1 else [self.n, self.n2]


def demo_defaults(dims: int) -> Dict[str, Any]:
    """Defaults of the 1-D and 2-D demo experiments."""
    if dims == 1:
        return {"dims": 1}
    return {
        "dims": 2,
        "n": 50,
        "n2": 50,
        "kernel_std": 1.5,
        "S": 2000,
        "t_max": 30.0 ** 2,
        "K": 16,
        "ground_truth": [b.model_dump() for b in DEFAULT_BUMPS_2D],
    }


def bench_defaults() -> Dict[str, Any]:
    """Desk-scale 1-D solver comparison instance."""
    return {
        "dims": 1,
        "n": 100,
        "K": 10,
        "S": 2000,
        "ground_truth": [
            {"center": [30.0], "variance": 16.0, "amplitude": 1.0},
            {"center": [70.0], "variance": 25.0, "amplitude": 0.8},
        ],
    }


def load_experiment(
    path: Optional[str],
    dims: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
    base: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Read an experiment document and merge it over default values.

    Args:
        path: JSON document, or None for the defaults alone
        dims: Dimension the caller requires; selects the demo defaults
        overrides: Command-line values; None entries are ignored
        base: Defaults to use instead of the demo defaults

    Raises:
        ConfigurationError: If the file is not valid JSON or fails validation
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigurationError(f"{path} must contain a JSON object")
    base = demo_defaults(dims or 1) if base is None else base
    merged = {**base, **document, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    if dims is not None and merged.get("dims", dims) != dims:
        raise ConfigurationError(f"document declares dims={merged['dims']} but the command expects {dims}")
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        messages = [f"{'.'.join(str(p) for p in err['loc']) or 'document'}: {err['msg']}" for err in e.errors()]
        raise ConfigurationError("; ".join(messages), errors=messages)
