"""
Pipeline stages shared by the command-line commands.

Each stage reads its inputs, runs one library step, writes its artifacts
into the output directory and returns what later stages need.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import NumericalFailureError
from core.models.experiment import ExperimentConfig
from core.models.records import BlobsDocument, RegionsDocument, SolveRecord, TubeSidecar
from core.monitoring.logger import get_logger, metrics
from core.registry.solver_registry import get_solver, solver_registry
from core.services import artifacts
from core.services.bayes import (
    LinearGaussianModel,
    SampleSet,
    deconvolution_model,
    gaussian_bumps,
    map_estimate,
    posterior_mean,
    sample_posterior,
    simulate_data,
)
from core.services.blobs import BlobPoint, BlobRegion, detect_log_blobs, extract_regions, project_region
from core.services.scalespace import (
    ScaleGrid,
    ScaleSpaceCube,
    SpatialGrid,
    Tube,
    gaussian_scale_space,
    make_scale_grid,
    normalized_laplacian,
)
from core.services.solvers import SolverResult, SolverStatus, TracePoint, TvUlogProblem
from core.services.tube import CredibleTubeEstimate, estimate_credible_tube

logger = get_logger(__name__)

# The sampler key is offset from the data key so both streams stay independent
SAMPLING_SEED_OFFSET = 1_000_003


@dataclass
class Experiment:
    """Grids, model and simulated data of one experiment."""
    config: ExperimentConfig
    spatial: SpatialGrid
    scale: ScaleGrid
    model: LinearGaussianModel
    ground_truth: np.ndarray
    data: np.ndarray


def build_grids(exp: ExperimentConfig) -> Tuple[SpatialGrid, ScaleGrid]:
    if exp.dims == 1:
        spatial = SpatialGrid.line(exp.n, exp.h)
    else:
        spatial = SpatialGrid.image(exp.n, exp.n2, exp.h, exp.h)
    return spatial, make_scale_grid(exp.t_min, exp.t_max, exp.K)


def simulate_experiment(exp: ExperimentConfig) -> Experiment:
    """Grids, deconvolution model, ground truth and noisy data."""
    spatial, scale = build_grids(exp)
    model = deconvolution_model(spatial, exp.kernel_std, exp.gamma, exp.tau, exp.eps)
    truth = gaussian_bumps(
        spatial,
        [b.center for b in exp.ground_truth],
        [b.variance for b in exp.ground_truth],
        [b.amplitude for b in exp.ground_truth],
    ).reshape(-1)
    data = simulate_data(model, truth, exp.seed)
    logger.info("Simulated experiment", dims=exp.dims, size=spatial.size, K=scale.K, bumps=len(exp.ground_truth))
    return Experiment(exp, spatial, scale, model, truth, data)


def sample_stage(experiment: Experiment, out: Path) -> SampleSet:
    exp = experiment.config
    with metrics.timer("sampling"):
        sample_set = sample_posterior(experiment.model, experiment.data, exp.S, exp.seed + SAMPLING_SEED_OFFSET)
    artifacts.write_samples(out / "samples.tvss", sample_set, experiment.spatial)
    return sample_set


def tube_stage(
    sample_set: SampleSet,
    spatial: SpatialGrid,
    scale: ScaleGrid,
    alpha: float,
    max_bisect: int,
    out: Path,
) -> CredibleTubeEstimate:
    estimate = estimate_credible_tube(sample_set, spatial, scale, alpha=alpha, max_bisect=max_bisect)
    artifacts.write_tube(out, estimate.tube)
    artifacts.write_model(out / "tube.json", tube_sidecar(estimate))
    return estimate


def tube_sidecar(estimate: CredibleTubeEstimate) -> TubeSidecar:
    return TubeSidecar(
        alpha=estimate.alpha,
        S=estimate.S,
        S_alpha=estimate.S_alpha,
        containment=estimate.containment,
        bisect_steps=estimate.bisect_steps,
        spanned=estimate.spanned,
        volume=estimate.tube.volume,
    )


def solver_options(solver: str, mu: Optional[float], tol: Optional[float], max_iters: Optional[int]):
    return get_solver(solver).default_options(mu=mu, tol=tol, max_iters=max_iters)


def write_timings(out: Path, trace: Sequence[TracePoint] = ()) -> Path:
    """Stage timings and trace seconds of the current command."""
    return artifacts.write_model(out / "timings.json", artifacts.timings_document(collected_timings(), trace))


def solve_stage(tube: Tube, solver: str, opts, out: Path) -> Tuple[SolverResult, SolveRecord]:
    """
    Solve in ``tube`` and write the minimizer, its trace and ``solve.json``.

    Raises:
        NumericalFailureError: When the solver reports a numerical failure;
            ``trace.csv``, ``solve.json`` and ``timings.json`` are written
            first, the minimizer is not
    """
    problem = TvUlogProblem(tube)
    with metrics.timer("solve"):
        result = solver_registry.run(solver, problem, opts)
    failed = result.status is SolverStatus.NUMERICAL_FAILURE
    record = SolveRecord(
        solver=solver,
        status=result.status.value,
        objective=None if failed else result.objective,
        iterations=result.iterations,
        mu=result.info.get("mu"),
        gap=result.info.get("gap"),
    )
    artifacts.write_trace(out / "trace.csv", result.trace)
    artifacts.write_model(out / "solve.json", record)
    if failed:
        write_timings(out, result.trace)
        reason = result.info.get("error") or result.info.get("cvxopt_status") or "see log"
        raise NumericalFailureError(f"solver {solver} failed after {result.iterations} iterations ({reason})",
                                    detail={"solver": solver, "iterations": result.iterations})
    artifacts.write_cube(out / "minimizer.tvuc", result.minimizer)
    return result, record


def extract_stage(minimizer: ScaleSpaceCube, r: float, dark: bool, out: Path) -> List[BlobRegion]:
    """Regions of the normalized Laplacian of a minimizer, with PBM projections."""
    with metrics.timer("extraction"):
        lap = normalized_laplacian(minimizer)
        regions = extract_regions(lap, r, dark=dark)
    artifacts.write_cube(out / "laplacian.tvuc", lap)
    document = RegionsDocument(r=r, dark=dark, regions=[artifacts.region_record(reg) for reg in regions])
    artifacts.write_model(out / "regions.json", document)
    for number, region in enumerate(regions, start=1):
        projected = project_region(region)
        artifacts.write_pbm(out / f"region_{number}_centers.pbm", projected.center_mask)
        artifacts.write_pbm(out / f"region_{number}_extent.pbm", projected.extent_mask)
    logger.info("Extracted regions", regions=len(regions), r=r, dark=dark)
    return regions


def point_estimate_stage(experiment: Experiment, sample_set: SampleSet, dark: bool, out: Path) -> Tuple[np.ndarray, List[BlobPoint]]:
    """LoG blobs of the posterior mean (1-D) or MAP estimate (2-D)."""
    if experiment.spatial.dims == 1:
        estimate, source = posterior_mean(sample_set), "posterior-mean"
    else:
        estimate, source = map_estimate(experiment.model, experiment.data), "map"
    cube = gaussian_scale_space(estimate, experiment.spatial, experiment.scale)
    blobs = detect_log_blobs(cube, dark=dark)
    document = BlobsDocument(source=source, dark=dark, blobs=[artifacts.blob_record(b) for b in blobs])
    artifacts.write_model(out / "point_blobs.json", document)
    return estimate, blobs


def collected_timings() -> Dict[str, float]:
    """Total seconds per timed stage."""
    return {name: round(sum(values), 6) for name, values in metrics.get_metrics().items() if ":" not in name}


def list_artifacts(out: Path) -> List[str]:
    return sorted(p.name for p in out.iterdir() if p.is_file())
