"""Tests for credible scale-space tube estimation."""

import numpy as np
import pytest

from core.exceptions import DimensionMismatchError, EmptyInputError, InvalidArgumentError
from core.services.bayes import SampleSet
from core.services.scalespace import ScaleSpaceCube, SpatialGrid, make_scale_grid
from core.services.tube import (
    OrderedCubes,
    containment_count,
    credible_sample_count,
    credible_tube,
    density_order,
    estimate_credible_tube,
    scale_space_samples,
    span_tube,
)


def test_span_tube_contains_every_cube(line_grid, small_scales, make_cube):
    cubes = [make_cube(line_grid, small_scales) for _ in range(6)]
    tube = span_tube(cubes)
    assert all(tube.contains(c) for c in cubes)
    assert containment_count(cubes, tube) == 6


def test_span_tube_of_single_cube_is_point(line_grid, small_scales, make_cube):
    cube = make_cube(line_grid, small_scales)
    tube = span_tube([cube])
    assert tube.is_point()
    assert np.array_equal(tube.lower.values, cube.values)


def test_span_tube_rejects_empty_and_mixed_grids(line_grid, small_scales, make_cube):
    with pytest.raises(EmptyInputError):
        span_tube([])
    other = make_cube(line_grid, make_scale_grid(1.0, 9.0, 3))
    with pytest.raises(DimensionMismatchError):
        span_tube([make_cube(line_grid, small_scales), other])


def test_containment_count_of_empty_list_is_zero(line_grid, small_scales, make_cube):
    tube = span_tube([make_cube(line_grid, small_scales)])
    assert containment_count([], tube) == 0


def test_containment_counts_boundary_as_inside(line_grid, small_scales):
    low = ScaleSpaceCube.constant(line_grid, small_scales, 0.0)
    high = ScaleSpaceCube.constant(line_grid, small_scales, 1.0)
    outside = ScaleSpaceCube.constant(line_grid, small_scales, 1.0 + 1e-12)
    tube = span_tube([low, high])
    assert containment_count([low, high, outside], tube) == 2


@pytest.mark.parametrize("S, alpha, expected", [(10000, 0.05, 9500), (2000, 0.05, 1900), (10, 0.5, 5), (3, 0.99, 1), (7, 0.1, 7)])
def test_credible_sample_count(S, alpha, expected):
    assert credible_sample_count(S, alpha) == expected


def test_density_order_is_stable():
    order = density_order(np.array([1.0, 3.0, 3.0, 2.0]))
    assert order.tolist() == [1, 2, 3, 0]


def test_ordered_cubes_streaming_matches_resident(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    resident = OrderedCubes(samples, line_grid, small_scales, chunk=16)
    streamed = OrderedCubes(samples, line_grid, small_scales, chunk=16, resident_limit_mb=0.0)
    assert resident.resident and not streamed.resident
    for s in (1, 17, 200):
        lo_a, hi_a = resident.span(s)
        lo_b, hi_b = streamed.span(s)
        assert np.array_equal(lo_a, lo_b) and np.array_equal(hi_a, hi_b)
    lower, upper = resident.span(50)
    assert resident.count_inside(lower, upper) == streamed.count_inside(lower, upper)


def test_density_ordered_tubes_grow(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    cubes = OrderedCubes(samples, line_grid, small_scales)
    previous = None
    for s in (1, 5, 50, 200):
        lower, upper = cubes.span(s)
        if previous is not None:
            assert np.all(lower <= previous[0]) and np.all(previous[1] <= upper)
        previous = (lower, upper)


def test_credible_tube_holds_enough_samples(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    estimate = estimate_credible_tube(samples, line_grid, small_scales, alpha=0.1)
    assert estimate.S_alpha == 180
    assert estimate.containment >= estimate.S_alpha
    assert 1 <= estimate.spanned <= estimate.S_alpha
    cubes = scale_space_samples(samples, line_grid, small_scales)
    assert containment_count(cubes, estimate.tube) == estimate.containment


def test_credible_tube_is_smallest_credible_member_found(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    estimate = estimate_credible_tube(samples, line_grid, small_scales, alpha=0.1, max_bisect=20)
    if estimate.spanned > 1:
        ordered = OrderedCubes(samples, line_grid, small_scales)
        smaller = ordered.tube(*ordered.span(estimate.spanned - 1))
        cubes = scale_space_samples(samples, line_grid, small_scales)
        if estimate.containment != estimate.S_alpha:
            assert containment_count(cubes, smaller) < estimate.S_alpha


def test_zero_bisection_steps_span_credible_count(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    estimate = estimate_credible_tube(samples, line_grid, small_scales, alpha=0.1, max_bisect=0)
    assert estimate.bisect_steps == 0
    assert estimate.spanned == estimate.S_alpha
    lower, _ = OrderedCubes(samples, line_grid, small_scales).span(estimate.S_alpha)
    assert np.array_equal(estimate.tube.lower.values, lower)


def test_identical_samples_give_point_tube(line_grid, small_scales):
    samples = SampleSet(np.ones((5, line_grid.size)), np.zeros(5), seed=0)
    estimate = estimate_credible_tube(samples, line_grid, small_scales, alpha=0.2)
    assert estimate.tube.is_point()
    assert estimate.containment == 5


def test_larger_alpha_gives_smaller_tube(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    wide = credible_tube(samples, line_grid, small_scales, alpha=0.05)
    narrow = credible_tube(samples, line_grid, small_scales, alpha=0.5)
    assert narrow.volume < wide.volume


def test_credible_tube_validates_arguments(small_posterior, line_grid, small_scales):
    _, _, samples = small_posterior
    with pytest.raises(InvalidArgumentError):
        estimate_credible_tube(samples, line_grid, small_scales, alpha=1.0)
    with pytest.raises(InvalidArgumentError):
        estimate_credible_tube(SampleSet(np.ones((1, 12)), np.zeros(1), seed=0), line_grid, small_scales)
    with pytest.raises(DimensionMismatchError):
        estimate_credible_tube(samples, SpatialGrid.line(10), small_scales)
