"""Single-stage commands operating on persisted artifacts."""

from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from core.models.experiment import load_experiment
from core.models.records import RunSummary
from core.monitoring.logger import get_logger, metrics
from core.services import artifacts
from core.services.scalespace import make_scale_grid
from core.services.solvers import TracePoint
from tasks.pipeline import (
    extract_stage,
    list_artifacts,
    solve_stage,
    solver_options,
    tube_sidecar,
    tube_stage,
    write_timings,
)

logger = get_logger(__name__)


def _prepare(out_dir: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.reset()
    return out


def _write_summary(out: Path, summary: RunSummary, trace: Sequence[TracePoint] = ()) -> RunSummary:
    write_timings(out, trace)
    summary.artifacts = list_artifacts(out) + ["summary.json"]
    artifacts.write_model(out / "summary.json", summary)
    return summary


def cmd_tube(
    samples_path: str,
    config_path: Optional[str],
    out_dir: str,
    overrides: Optional[Dict[str, Any]] = None,
) -> int:
    """
    Estimate the credible tube of a persisted sample set.

    The scale grid, alpha and bisection cap come from the experiment
    document so the tube matches the one of the demo that wrote the samples.
    """
    sample_set, spatial = artifacts.read_samples(samples_path)
    exp = load_experiment(config_path, spatial.dims, overrides)
    out = _prepare(out_dir)
    scale = make_scale_grid(exp.t_min, exp.t_max, exp.K)
    estimate = tube_stage(sample_set, spatial, scale, exp.alpha, exp.max_bisect, out)
    logger.info("Tube written", S=estimate.S, S_alpha=estimate.S_alpha, containment=estimate.containment)
    _write_summary(out, RunSummary(command="tube", experiment=exp.model_dump(), tube=tube_sidecar(estimate)))
    return 0


def cmd_solve(
    lower_path: str,
    upper_path: str,
    out_dir: str,
    solver: str = "socp",
    mu: Optional[float] = None,
    tol: Optional[float] = None,
    max_iters: Optional[int] = None,
) -> int:
    """Solve the TV-ULoG problem in a persisted tube."""
    tube = artifacts.read_tube(lower_path, upper_path)
    out = _prepare(out_dir)
    opts = solver_options(solver, mu, tol, max_iters)
    result, record = solve_stage(tube, solver, opts, out)
    logger.info("Minimizer written", solver=solver, status=record.status, objective=record.objective)
    _write_summary(out, RunSummary(command="solve", solve=record), result.trace)
    return 0


def cmd_extract(minimizer_path: str, out_dir: str, r: float = 0.5, dark: bool = False) -> int:
    """Extract blob regions from a persisted minimizer."""
    minimizer = artifacts.read_cube(minimizer_path)
    out = _prepare(out_dir)
    regions = extract_stage(minimizer, r, dark, out)
    _write_summary(out, RunSummary(command="extract", region_count=len(regions)))
    return 0
