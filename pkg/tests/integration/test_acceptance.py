"""Desk-scale acceptance runs; deselect with ``-m "not slow"``."""

import json

import numpy as np
import pandas as pd
import pytest

from core.models.records import RegionsDocument
from core.services.artifacts import read_model, read_pbm
from core.services.bayes import deconvolution_model, gaussian_bumps, sample_posterior, simulate_data
from core.services.scalespace import SpatialGrid, make_scale_grid
from core.services.solvers import (
    SolverOptions,
    SolverStatus,
    TvUlogProblem,
    objective,
    solve_dual_smoothing,
    solve_primal_smoothing,
    solve_primal_smoothing_lbfgsb,
    solve_tv_ulog_socp,
)
from core.services.tube import estimate_credible_tube, scale_space_samples
from tvulog_app import main

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def posterior_24():
    spatial = SpatialGrid.line(24)
    scale = make_scale_grid(1.0, 25.0, 5)
    model = deconvolution_model(spatial, 1.5, 0.03, 1.0, 1e-2)
    truth = gaussian_bumps(spatial, [[8.0], [17.0]], [4.0, 2.0], [1.0, 0.8]).reshape(-1)
    y = simulate_data(model, truth, 5)
    samples = sample_posterior(model, y, 2000, 6)
    return spatial, scale, samples


@pytest.fixture(scope="module")
def credible_24(posterior_24):
    spatial, scale, samples = posterior_24
    return estimate_credible_tube(samples, spatial, scale, alpha=0.05, max_bisect=20)


def test_credible_tube_holds_its_share_of_samples(credible_24):
    assert credible_24.S == 2000
    assert credible_24.S_alpha == 1900
    assert credible_24.containment >= 1900


def test_socp_beats_every_sample_in_the_tube(posterior_24, credible_24):
    spatial, scale, samples = posterior_24
    problem = TvUlogProblem(credible_24.tube)
    result = solve_tv_ulog_socp(problem)
    assert result.status == SolverStatus.CONVERGED
    assert result.info["gap"] <= 1e-8 * max(1.0, abs(result.info["primal_objective"]))
    slack = 1e-6 * max(1.0, result.objective)
    inside = [c for c in scale_space_samples(samples, spatial, scale) if credible_24.tube.contains(c, slack=1e-12)]
    assert len(inside) >= 1900
    assert all(result.objective <= objective(problem, c) + slack for c in inside)


@pytest.mark.parametrize("solve", [solve_dual_smoothing, solve_primal_smoothing, solve_primal_smoothing_lbfgsb])
def test_smoothing_backends_agree_with_socp(solve, credible_24):
    problem = TvUlogProblem(credible_24.tube)
    reference = solve_tv_ulog_socp(problem)
    assert reference.status == SolverStatus.CONVERGED
    optimum = reference.objective
    mu = 1e-3
    result = solve(problem, SolverOptions(max_iters=200_000, tol=1e-10, mu=mu))
    assert credible_24.tube.contains(result.minimizer, slack=1e-12)
    assert result.objective >= optimum - 1e-6
    assert result.objective == pytest.approx(optimum, rel=1e-2, abs=mu * problem.size)


def test_demo_1d_regions_cover_the_ground_truth(tmp_path):
    out = tmp_path / "demo"
    assert main(["demo-1d", "--out", str(out)]) == 0
    regions = read_model(out / "regions.json", RegionsDocument).regions
    assert 1 <= len(regions) <= 5
    extent = np.zeros(200, dtype=bool)
    for number in range(1, len(regions) + 1):
        extent |= read_pbm(out / f"region_{number}_extent.pbm")[:, 0]
    for center in (45, 100, 155):
        assert extent[center]


BENCH_MUS = [1e-1, 1e-2, 1e-3]


def test_interior_point_reaches_below_smoothing_floors(tmp_path):
    config = tmp_path / "bench.json"
    config.write_text(json.dumps({"solvers": ["socp", "dual-smoothing", "primal-smoothing"], "mus": BENCH_MUS}))
    out = tmp_path / "bench"
    assert main(["bench", "--config", str(config), "--out", str(out)]) == 0

    frame = pd.read_csv(out / "bench.csv")
    floors = frame.groupby("run")["normalized"].min()
    socp_final = frame.loc[frame["run"] == "socp", "normalized"].iloc[-1]
    assert socp_final <= 1e-6
    for solver in ("dual-smoothing", "primal-smoothing"):
        values = [floors[f"{solver} mu={mu:g}"] for mu in BENCH_MUS]
        assert all(v >= max(10.0 * socp_final, 1e-5) for v in values), values
        assert values[0] >= values[1] >= values[2], values
