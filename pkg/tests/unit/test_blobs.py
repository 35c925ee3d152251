"""Tests for LoG detection, region extraction and projections."""

import numpy as np
import pytest

from core.exceptions import InvalidArgumentError
from core.services.bayes import prototypical_blob
from core.services.blobs import (
    blob_radius,
    detect_log_blobs,
    disc_footprint,
    extract_regions,
    local_minima,
    project_centers,
    project_circles,
    project_region,
    regions_overlap,
    ulog_blobs,
)
from core.services.scalespace import ScaleSpaceCube, SpatialGrid, gaussian_scale_space, make_scale_grid


def line_cube(profile, k=1, n=7):
    """Cube on a line grid with ``profile`` placed in scale slice ``k``, zeros elsewhere."""
    spatial = SpatialGrid.line(n)
    scale = make_scale_grid(1.0, 4.0, 3)
    values = np.zeros((n, 1, 3))
    values[: len(profile), 0, k] = profile
    return ScaleSpaceCube(spatial, scale, values)


def test_blob_radius():
    assert blob_radius(4.0, 2) == pytest.approx(np.sqrt(8.0))
    assert blob_radius(9.0, 1) == pytest.approx(3.0)


def test_prototypical_blob_is_detected_at_its_scale():
    grid = SpatialGrid.image(64, 64)
    scale = make_scale_grid(1.0, 100.0, 20)
    s = 25.0
    u = gaussian_scale_space(prototypical_blob(grid, (32.0, 32.0), s), grid, scale)
    blobs = detect_log_blobs(u)
    near = [p for p in blobs if max(abs(p.index[0] - 32), abs(p.index[1] - 32)) <= 1]
    assert len(near) == 1
    b = scale.ratio
    assert s / b <= near[0].scale <= s * b
    assert near[0].value < 0
    assert not near[0].on_scale_boundary
    assert blobs[0] == near[0]


def test_dark_detection_mirrors_bright_detection():
    grid = SpatialGrid.line(64)
    scale = make_scale_grid(1.0, 36.0, 12)
    image = prototypical_blob(grid, (32.0,), 9.0)
    bright = detect_log_blobs(gaussian_scale_space(image, grid, scale))
    dark = detect_log_blobs(gaussian_scale_space(-image, grid, scale), dark=True)
    assert bright[0].index[:2] == (32, 0)
    assert [p.index for p in dark] == [p.index for p in bright]
    assert all(p.value > 0 for p in dark)


def test_ulog_blobs_are_log_blobs(image_grid, small_scales, make_cube):
    u = make_cube(image_grid, small_scales)
    assert ulog_blobs(u) == detect_log_blobs(u)


def test_local_minima_reports_each_plateau_once():
    a = line_cube([0.0, -1.0, -1.0, 0.0, -2.0], n=5)
    assert local_minima(a) == [(1, 0, 1), (4, 0, 1)]


def test_local_minima_of_bowl_and_constant_cube():
    spatial = SpatialGrid.image(5, 5)
    scale = make_scale_grid(1.0, 4.0, 3)
    i, j, k = np.meshgrid(np.arange(5), np.arange(5), np.arange(3), indexing="ij")
    bowl = ((i - 2) ** 2 + (j - 2) ** 2 + (k - 1) ** 2).astype(float)
    assert local_minima(ScaleSpaceCube(spatial, scale, bowl)) == [(2, 2, 1)]
    assert local_minima(ScaleSpaceCube.constant(spatial, scale, 3.0)) == [(0, 0, 0)]


def test_disjoint_regions():
    a = line_cube([0.0, -4.0, -2.5, 0.0, 0.0, -2.0, 0.0])
    regions = extract_regions(a)
    assert len(regions) == 2
    first, second = regions
    assert first.minimizer.index == (1, 0, 1)
    assert first.voxel_set() == {(1, 0, 1), (2, 0, 1)}
    assert first.threshold_value == pytest.approx(-2.0)
    assert second.voxel_set() == {(5, 0, 1)}
    assert not regions_overlap(first, second)
    assert first.scale_range() == (2.0, 2.0)


def test_overlapping_components_are_merged():
    a = line_cube([0.0, -4.0, -3.0, -3.5, 0.0])
    regions = extract_regions(a)
    assert len(regions) == 1
    region = regions[0]
    assert region.minimizer.index == (1, 0, 1)
    assert region.voxel_set() == {(1, 0, 1), (2, 0, 1), (3, 0, 1)}
    assert region.threshold_value == pytest.approx(-1.75)


def test_threshold_changes_region_size():
    a = line_cube([0.0, -4.0, -3.0, -1.0, 0.0])
    assert extract_regions(a, r=0.5)[0].size == 2
    assert extract_regions(a, r=0.2)[0].size == 3
    assert regions_overlap(extract_regions(a, r=0.5)[0], extract_regions(a, r=0.2)[0])


def test_dark_regions():
    a = line_cube([0.0, 4.0, 2.5, 0.0])
    assert extract_regions(a) == []
    regions = extract_regions(a, dark=True)
    assert len(regions) == 1
    assert regions[0].voxel_set() == {(1, 0, 1), (2, 0, 1)}
    assert regions[0].threshold_value == pytest.approx(2.0)
    assert regions[0].dark


@pytest.mark.parametrize("r", [0.0, 1.0, 1.5, -0.2])
def test_threshold_must_lie_in_open_unit_interval(r):
    with pytest.raises(InvalidArgumentError):
        extract_regions(line_cube([0.0, -1.0]), r=r)


def test_no_negative_minima_gives_no_regions(line_grid, small_scales):
    assert extract_regions(ScaleSpaceCube.constant(line_grid, small_scales, 1.0)) == []


def test_interval_projection_on_a_line():
    region = extract_regions(line_cube([0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0]))[0]
    centers = project_centers(region)
    assert centers.shape == (7, 1)
    assert centers[:, 0].tolist() == [False, False, True, False, False, False, False]
    # t = 2 in one dimension: radius sqrt(2)
    extent = project_circles(region)
    assert extent[:, 0].tolist() == [False, True, True, True, False, False, False]


def test_disc_projection_on_an_image():
    spatial = SpatialGrid.image(9, 9)
    scale = make_scale_grid(1.0, 4.0, 3)
    values = np.zeros((9, 9, 3))
    values[4, 4, 2] = -1.0
    region = extract_regions(ScaleSpaceCube(spatial, scale, values))[0]
    assert region.minimizer.on_scale_boundary
    projected = project_region(region)
    assert projected.center_mask.sum() == 1
    # radius^2 = 2 t = 8 covers the 5x5 square around the center and nothing else
    expected = np.zeros((9, 9), dtype=bool)
    expected[2:7, 2:7] = True
    assert np.array_equal(projected.extent_mask, expected)
    assert np.all(projected.extent_mask >= projected.center_mask)


def test_disc_footprint_respects_grid_steps():
    footprint = disc_footprint(SpatialGrid.image(5, 5, h1=2.0, h2=1.0), 4.0)
    assert footprint.shape == (3, 5)
    assert footprint[0, 2] and footprint[1, 0] and not footprint[0, 0]


@pytest.mark.parametrize("r1, r2", [(0.2, 0.5), (0.5, 0.8), (0.3, 0.3)])
def test_larger_threshold_gives_nested_regions(r1, r2, rng):
    spatial = SpatialGrid.image(12, 10)
    scale = make_scale_grid(1.0, 9.0, 4)
    for _ in range(10):
        a = gaussian_scale_space(rng.standard_normal(spatial.shape), spatial, scale)
        loose = np.zeros(a.shape, dtype=bool)
        for region in extract_regions(a, r=r1):
            loose |= region.mask()
        for region in extract_regions(a, r=r2):
            assert np.all(loose[region.mask()])
