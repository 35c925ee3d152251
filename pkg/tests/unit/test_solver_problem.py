"""Tests for the shared solver types, flattening and projections."""

import numpy as np
import pytest

from core.config.settings import config
from core.exceptions import DimensionMismatchError, InvalidArgumentError
from core.services.scalespace import (
    ScaleSpaceCube,
    Tube,
    VectorFieldCube,
    normalized_laplacian,
    scale_normalized_tv,
)
from core.services.solvers import (
    SolverOptions,
    TvUlogProblem,
    default_mu,
    flatten,
    objective,
    project_ball_field,
    project_box,
    unflatten,
)
from core.services.solvers.problem import point_result, project_balls


def test_options_validation():
    with pytest.raises(InvalidArgumentError):
        SolverOptions(max_iters=0, tol=1e-6)
    with pytest.raises(InvalidArgumentError):
        SolverOptions(max_iters=10, tol=0.0)
    with pytest.raises(InvalidArgumentError):
        SolverOptions(max_iters=10, tol=1e-6, mu=-1.0)


def test_option_presets_use_config_and_ignore_none():
    first = SolverOptions.first_order(mu=None, tol=None, max_iters=50)
    assert first.max_iters == 50
    assert first.tol == config.solver.first_order_tol
    assert first.mu is None
    ip = SolverOptions.interior_point()
    assert ip.max_iters == config.solver.socp_max_iters
    assert ip.tol == config.solver.socp_tol
    assert first.with_mu(0.1).mu == 0.1


def test_flatten_uses_row_major_order(image_grid, small_scales, make_cube):
    u = make_cube(image_grid, small_scales)
    z = flatten(u)
    i, j, k = 3, 5, 2
    assert z[((i * image_grid.n2) + j) * small_scales.K + k] == u.values[i, j, k]
    back = unflatten(z, image_grid, small_scales)
    assert np.array_equal(back.values, u.values)
    with pytest.raises(DimensionMismatchError):
        unflatten(z[:-1], image_grid, small_scales)


def test_problem_tv_matches_composed_operators(image_grid, small_scales, make_tube, make_cube):
    problem = TvUlogProblem(make_tube(image_grid, small_scales))
    u = make_cube(image_grid, small_scales)
    expected = scale_normalized_tv(normalized_laplacian(u))
    assert objective(problem, u) == pytest.approx(expected, rel=1e-12)
    assert problem.site_field(u.flat()).shape == (image_grid.size * small_scales.K, 3)


def test_L_hat_bounds_operator_norm(line_grid, small_scales, make_tube):
    problem = TvUlogProblem(make_tube(line_grid, small_scales))
    exact = np.linalg.norm(problem.operators.A.toarray(), 2)
    assert problem.L_hat >= exact * 0.99
    assert problem.L_hat == pytest.approx(exact, rel=5e-2)


def test_project_box_clamps(line_grid, small_scales, make_tube, make_cube):
    tube = make_tube(line_grid, small_scales)
    projected = project_box(make_cube(line_grid, small_scales, amplitude=3.0), tube)
    assert tube.contains(projected)
    inside = tube.midpoint()
    assert np.array_equal(project_box(inside, tube).values, inside.values)


def test_project_balls_scales_only_long_vectors():
    w = np.array([0.3, 0.4, 3.0, 4.0])
    projected = project_balls(w, 2)
    np.testing.assert_allclose(projected, [0.3, 0.4, 0.6, 0.8])


def test_project_ball_field(line_grid, small_scales, rng):
    v = VectorFieldCube(line_grid, small_scales, 5.0 * rng.standard_normal((12, 1, 3, 2)))
    norms = project_ball_field(v).site_norms()
    assert np.all(norms <= 1.0 + 1e-12)


def test_default_mu(line_grid, small_scales):
    point = ScaleSpaceCube.constant(line_grid, small_scales, 1.0)
    assert default_mu(Tube(point, point)) == config.solver.mu_scale
    upper = ScaleSpaceCube.constant(line_grid, small_scales, 3.0)
    assert default_mu(Tube(point, upper)) == pytest.approx(2.0 * config.solver.mu_scale)


def test_point_result_reports_the_tube(line_grid, small_scales, make_cube):
    cube = make_cube(line_grid, small_scales)
    problem = TvUlogProblem(Tube(cube, cube))
    result = point_result(problem, "test")
    assert result.converged
    assert np.array_equal(result.minimizer.values, cube.values)
    assert result.objective == pytest.approx(objective(problem, cube))


def test_problem_requires_tube():
    with pytest.raises(InvalidArgumentError):
        TvUlogProblem("not a tube")
