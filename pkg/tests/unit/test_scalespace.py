"""Tests for grids, the Gaussian scale space and the normalized operators."""

import math

import numpy as np
import pytest

from core.exceptions import DimensionMismatchError, InvalidArgumentError
from core.services.bayes import prototypical_blob
from core.services.scalespace import (
    ScaleGrid,
    ScaleSpaceCube,
    SpatialGrid,
    Tube,
    VectorFieldCube,
    apply_A,
    apply_A_adjoint,
    gaussian_scale_space,
    make_scale_grid,
    normalized_gradient,
    normalized_laplacian,
    operator_norm_estimate,
    operators_for,
    scale_normalized_tv,
)


def loop_laplacian(u: np.ndarray, spatial: SpatialGrid, scales) -> np.ndarray:
    n1, n2, K = u.shape
    out = np.zeros_like(u)

    def mirror(i, n):
        if i < 0:
            return 1
        if i >= n:
            return n - 2
        return i

    for i in range(n1):
        for j in range(n2):
            for k in range(K):
                total = (u[mirror(i - 1, n1), j, k] - 2 * u[i, j, k] + u[mirror(i + 1, n1), j, k]) / spatial.h1 ** 2
                if spatial.dims == 2:
                    total += (u[i, mirror(j - 1, n2), k] - 2 * u[i, j, k] + u[i, mirror(j + 1, n2), k]) / spatial.h2 ** 2
                out[i, j, k] = scales[k] * total
    return out


def loop_tv(u: np.ndarray, spatial: SpatialGrid, scales, ratio: float) -> float:
    n1, n2, K = u.shape
    total = 0.0
    for i in range(n1):
        for j in range(n2):
            for k in range(K):
                root_t = math.sqrt(scales[k])
                parts = [root_t * (u[i + 1, j, k] - u[i, j, k]) / spatial.h1 if i < n1 - 1 else 0.0]
                if spatial.dims == 2:
                    parts.append(root_t * (u[i, j + 1, k] - u[i, j, k]) / spatial.h2 if j < n2 - 1 else 0.0)
                parts.append((u[i, j, k + 1] - u[i, j, k]) / (ratio - 1.0) if k < K - 1 else 0.0)
                total += math.sqrt(sum(p * p for p in parts))
    return total


GRID_CASES = [
    (SpatialGrid.line(3), 2),
    (SpatialGrid.line(16, 0.5), 6),
    (SpatialGrid.image(3, 4), 2),
    (SpatialGrid.image(9, 7, 1.0, 2.0), 4),
    (SpatialGrid.image(16, 16), 6),
]


# =============================================================================
# Grids and containers
# =============================================================================


def test_make_scale_grid_is_geometric():
    scale = make_scale_grid(1.0, 100.0, 5)
    assert scale.K == 5
    assert scale.scales[0] == 1.0
    assert scale.scales[-1] == 100.0
    ratios = np.diff(np.log(scale.as_array()))
    np.testing.assert_allclose(ratios, ratios[0])
    assert scale.ratio == pytest.approx(100.0 ** 0.25)


@pytest.mark.parametrize("t_min, t_max, K", [(1.0, 4.0, 1), (4.0, 1.0, 3), (0.0, 1.0, 3), (2.0, 2.0, 3)])
def test_make_scale_grid_rejects_bad_arguments(t_min, t_max, K):
    with pytest.raises(InvalidArgumentError):
        make_scale_grid(t_min, t_max, K)


def test_scale_grid_rejects_non_geometric_scales():
    with pytest.raises(InvalidArgumentError):
        ScaleGrid((1.0, 2.0, 5.0))


def test_spatial_grid_validation():
    with pytest.raises(InvalidArgumentError):
        SpatialGrid.line(2)
    with pytest.raises(InvalidArgumentError):
        SpatialGrid.image(4, 4, 1.0, 0.0)
    grid = SpatialGrid.line(5)
    assert grid.shape == (5, 1)
    assert grid.dims == 1
    assert grid.size == 5


def test_cube_rejects_wrong_shape_and_non_finite(line_grid, small_scales):
    with pytest.raises(DimensionMismatchError):
        ScaleSpaceCube(line_grid, small_scales, np.zeros((11, 1, 3)))
    values = np.zeros((12, 1, 3))
    values[0, 0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        ScaleSpaceCube(line_grid, small_scales, values)


def test_cube_values_are_read_only(line_grid, small_scales):
    cube = ScaleSpaceCube.constant(line_grid, small_scales, 1.0)
    with pytest.raises(ValueError):
        cube.values[0, 0, 0] = 2.0


def test_tube_validation_and_volume(line_grid, small_scales):
    lower = ScaleSpaceCube.constant(line_grid, small_scales, 0.0)
    upper = ScaleSpaceCube.constant(line_grid, small_scales, 0.5)
    tube = Tube(lower, upper)
    assert tube.volume == pytest.approx(0.5 * 12 * 3)
    assert tube.contains(tube.midpoint())
    assert not tube.is_point()
    with pytest.raises(InvalidArgumentError):
        Tube(upper, lower)
    other = ScaleSpaceCube.constant(line_grid, make_scale_grid(1.0, 9.0, 3))
    with pytest.raises(DimensionMismatchError):
        Tube(lower, other)


# =============================================================================
# Gaussian scale space
# =============================================================================


def test_scale_space_preserves_constants(image_grid, small_scales):
    cube = gaussian_scale_space(np.full(image_grid.shape, 3.0), image_grid, small_scales)
    np.testing.assert_allclose(cube.values, 3.0, atol=1e-12)


def test_scale_space_matches_analytic_blob():
    grid = SpatialGrid.image(64, 64)
    scale = make_scale_grid(1.0, 100.0, 20)
    s = 25.0
    cube = gaussian_scale_space(prototypical_blob(grid, (32.0, 32.0), s), grid, scale)
    i = np.arange(64)[:, None]
    j = np.arange(64)[None, :]
    interior = (slice(8, 56), slice(8, 56))
    for k, t in enumerate(scale.scales):
        v = s + t
        analytic = np.exp(-((i - 32) ** 2 + (j - 32) ** 2) / (2 * v)) / (2 * math.pi * v)
        assert np.max(np.abs(cube.values[:, :, k] - analytic)[interior]) <= 1e-3


def test_scale_space_rejects_wrong_image_size(line_grid, small_scales):
    with pytest.raises(DimensionMismatchError):
        gaussian_scale_space(np.zeros(11), line_grid, small_scales)


# =============================================================================
# Operators
# =============================================================================


def test_laplacian_of_quadratic_is_scaled_constant(small_scales):
    grid = SpatialGrid.line(10)
    x = np.arange(10, dtype=float)
    u = ScaleSpaceCube(grid, small_scales, np.repeat((x ** 2)[:, None, None], 3, axis=2))
    lap = normalized_laplacian(u).values
    for k, t in enumerate(small_scales.scales):
        np.testing.assert_allclose(lap[1:-1, 0, k], 2.0 * t)


@pytest.mark.parametrize("spatial, K", GRID_CASES)
def test_operators_match_loop_oracles(spatial, K, make_cube):
    scale = make_scale_grid(1.0, 10.0, K)
    u = make_cube(spatial, scale)
    lap = normalized_laplacian(u)
    expected_lap = loop_laplacian(u.values, spatial, scale.scales)
    assert np.max(np.abs(lap.values - expected_lap)) <= 1e-12 * max(1.0, np.max(np.abs(expected_lap)))
    expected_tv = loop_tv(lap.values, spatial, scale.scales, scale.ratio)
    assert scale_normalized_tv(lap) == pytest.approx(expected_tv, rel=1e-12)


@pytest.mark.parametrize("spatial, K", GRID_CASES)
def test_adjoint_identity(spatial, K, make_cube, rng):
    scale = make_scale_grid(1.0, 10.0, K)
    u = make_cube(spatial, scale)
    v = VectorFieldCube(spatial, scale, rng.standard_normal((spatial.n1, spatial.n2, K, spatial.dims + 1)))
    left = float(np.dot(apply_A(u).flat(), v.flat()))
    right = float(np.dot(u.flat(), apply_A_adjoint(v).flat()))
    assert abs(left - right) <= 1e-10 * max(1.0, abs(left))


@pytest.mark.parametrize("spatial, K", GRID_CASES)
def test_sparse_A_equals_composition(spatial, K, make_cube):
    scale = make_scale_grid(1.0, 10.0, K)
    u = make_cube(spatial, scale)
    composed = normalized_gradient(normalized_laplacian(u)).flat()
    direct = operators_for(spatial, scale).A @ u.flat()
    assert np.linalg.norm(direct - composed) <= 1e-12 * max(1.0, np.linalg.norm(composed))


def test_gradient_interleaves_components(image_grid, small_scales):
    ops = operators_for(image_grid, small_scales)
    assert ops.gradient.shape == (ops.size * 3, ops.size)
    u = np.zeros(ops.size)
    u[0] = 1.0
    field = (ops.gradient @ u).reshape(image_grid.n1, image_grid.n2, small_scales.K, 3)
    # forward differences at the origin site: -sqrt(t_1) in both spatial axes, -1/(b-1) in scale
    np.testing.assert_allclose(field[0, 0, 0], [-1.0, -1.0, -1.0 / (small_scales.ratio - 1.0)])


def test_tv_of_single_unit_difference():
    grid = SpatialGrid.line(4)
    scale = make_scale_grid(1.0, 4.0, 2)
    values = np.zeros((4, 1, 2))
    values[1:, 0, :] = 1.0
    u = ScaleSpaceCube(grid, scale, values)
    # one x-difference of 1 per scale, weighted by sqrt(t)
    assert scale_normalized_tv(u) == pytest.approx(1.0 + 2.0)


def test_operator_norm_estimate_is_tight_lower_bound(image_grid, small_scales, rng):
    ops = operators_for(image_grid, small_scales)
    estimate = operator_norm_estimate(image_grid, small_scales)
    dense = ops.A.toarray()
    exact = np.linalg.norm(dense, 2)
    assert estimate <= exact * (1 + 1e-9)
    assert estimate == pytest.approx(exact, rel=5e-2)
    for _ in range(5):
        z = rng.standard_normal(ops.size)
        assert np.linalg.norm(ops.A @ z) <= 1.01 * estimate * np.linalg.norm(z)
