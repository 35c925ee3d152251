"""Small experiment documents for end-to-end runs."""

import json

import pytest

SMALL_1D = {
    "dims": 1,
    "n": 40,
    "kernel_std": 1.5,
    "S": 200,
    "alpha": 0.1,
    "max_bisect": 8,
    "t_min": 1.0,
    "t_max": 64.0,
    "K": 5,
    "ground_truth": [
        {"center": [12.0], "variance": 9.0, "amplitude": 1.0},
        {"center": [28.0], "variance": 4.0, "amplitude": 0.8},
    ],
}

SMALL_2D = {
    "dims": 2,
    "n": 14,
    "n2": 12,
    "kernel_std": 1.0,
    "S": 100,
    "alpha": 0.1,
    "max_bisect": 6,
    "t_min": 1.0,
    "t_max": 16.0,
    "K": 4,
    "ground_truth": [{"center": [7.0, 6.0], "variance": 4.0, "amplitude": 1.0}],
}


def _write(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


@pytest.fixture
def config_1d(tmp_path):
    return _write(tmp_path, "small_1d.json", SMALL_1D)


@pytest.fixture
def config_2d(tmp_path):
    return _write(tmp_path, "small_2d.json", SMALL_2D)


@pytest.fixture
def bench_config(tmp_path):
    document = {k: v for k, v in SMALL_1D.items() if k != "dims"}
    document.update(solvers=["socp", "primal-smoothing"], mus=[0.1])
    return _write(tmp_path, "bench.json", document)
