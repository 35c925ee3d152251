"""Shared fixtures for unit and integration tests."""

import numpy as np
import pytest

from core.services.bayes import deconvolution_model, gaussian_bumps, sample_posterior, simulate_data
from core.services.scalespace import ScaleSpaceCube, SpatialGrid, Tube, gaussian_scale_space, make_scale_grid


@pytest.fixture
def line_grid():
    return SpatialGrid.line(12)


@pytest.fixture
def image_grid():
    return SpatialGrid.image(8, 7)


@pytest.fixture
def small_scales():
    return make_scale_grid(1.0, 4.0, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def make_cube(rng):
    """Factory of random cubes on given grids."""
    def make(spatial, scale, amplitude=1.0):
        return ScaleSpaceCube(spatial, scale, amplitude * rng.standard_normal((spatial.n1, spatial.n2, scale.K)))
    return make


@pytest.fixture
def make_tube(rng):
    """Factory of random tubes with entrywise widths below 2 * width."""
    def make(spatial, scale, width=0.5):
        center = rng.standard_normal((spatial.n1, spatial.n2, scale.K))
        half = width * rng.random(center.shape)
        return Tube(ScaleSpaceCube(spatial, scale, center - half), ScaleSpaceCube(spatial, scale, center + half))
    return make


@pytest.fixture
def bump_signal(line_grid):
    return gaussian_bumps(line_grid, [[6.0]], [4.0], [1.0]).reshape(-1)


@pytest.fixture
def small_posterior(line_grid, bump_signal):
    """Deconvolution model, data and 200 posterior samples on a 12-cell line."""
    model = deconvolution_model(line_grid, kernel_std=1.0, gamma=0.05, tau=1.0, eps=1e-2)
    y = simulate_data(model, bump_signal, seed=3)
    samples = sample_posterior(model, y, S=200, seed=11)
    return model, y, samples


@pytest.fixture
def sample_tube(small_posterior, line_grid, small_scales):
    """Tube spanned by a handful of posterior scale-space samples."""
    _, _, samples = small_posterior
    cubes = [gaussian_scale_space(f, line_grid, small_scales) for f in samples.samples[:20]]
    stack = np.stack([c.values for c in cubes])
    return Tube(cubes[0].with_values(stack.min(axis=0)), cubes[0].with_values(stack.max(axis=0)))
