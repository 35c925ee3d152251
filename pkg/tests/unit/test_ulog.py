"""Tests for the quadratic ULoG baseline."""

import numpy as np
import pytest

from core.services.scalespace import ScaleSpaceCube, Tube, normalized_laplacian
from core.services.solvers import SolverOptions, SolverStatus, TvUlogProblem, solve_ulog_quadratic
from core.services.solvers.ulog import ulog_objective


def test_ulog_objective_is_squared_laplacian(line_grid, small_scales, make_cube, make_tube):
    problem = TvUlogProblem(make_tube(line_grid, small_scales))
    u = make_cube(line_grid, small_scales)
    lap = normalized_laplacian(u).flat()
    assert ulog_objective(problem, u.flat()) == pytest.approx(float(lap @ lap))


def test_ulog_improves_on_midpoint_and_stays_feasible(sample_tube):
    problem = TvUlogProblem(sample_tube)
    result = solve_ulog_quadratic(problem, SolverOptions(max_iters=3000, tol=1e-10))
    assert result.status != SolverStatus.NUMERICAL_FAILURE
    assert sample_tube.contains(result.minimizer, slack=1e-12)
    midpoint = sample_tube.midpoint().flat()
    assert result.objective <= ulog_objective(problem, midpoint) + 1e-12
    assert result.info["tv"] >= 0.0


def test_ulog_is_near_every_feasible_candidate(sample_tube, rng):
    problem = TvUlogProblem(sample_tube)
    result = solve_ulog_quadratic(problem, SolverOptions(max_iters=3000, tol=1e-14))
    # FGP bound from the midpoint start
    distance = 0.25 * float(np.sum(sample_tube.width ** 2))
    bound = 4.0 * problem.laplacian_norm ** 2 * distance / (result.iterations + 1) ** 2 + 1e-10
    lower, upper = sample_tube.lower.flat(), sample_tube.upper.flat()
    for _ in range(20):
        candidate = lower + rng.random(lower.shape) * (upper - lower)
        assert result.objective <= ulog_objective(problem, candidate) + bound


def test_ulog_point_tube(line_grid, small_scales, make_cube):
    cube = make_cube(line_grid, small_scales)
    result = solve_ulog_quadratic(TvUlogProblem(Tube(cube, cube)), SolverOptions.first_order())
    assert result.status == SolverStatus.CONVERGED
    assert np.array_equal(result.minimizer.values, cube.values)


def test_ulog_zero_in_tube(line_grid, small_scales):
    tube = Tube(ScaleSpaceCube.constant(line_grid, small_scales, -1.0),
                ScaleSpaceCube.constant(line_grid, small_scales, 1.0))
    result = solve_ulog_quadratic(TvUlogProblem(tube), SolverOptions(max_iters=100, tol=1e-8))
    assert result.objective == 0.0
