"""
Pytest configuration for spde-limits tests.

Provides grids, seeded generators, small study configurations and a helper
that writes run config files for CLI tests.
"""

import json

import numpy as np
import pytest

from spde_limits.config import InitialData, StudyConfig
from spde_limits.models import Model, ModelSpec, SigmaKind, SigmaSchedule
from spde_limits.parallel import WORKERS_ENV
from spde_limits.spectral import FourierGrid, SpectralField, from_function
from spde_limits.trajectory import Trajectory


@pytest.fixture(autouse=True)
def clear_worker_env(monkeypatch):
    """Keep a developer's SPDE_LIMITS_WORKERS from leaking into tests."""
    monkeypatch.delenv(WORKERS_ENV, raising=False)


@pytest.fixture
def rng():
    """Seeded generator for test data (not for the noise itself)."""
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid8():
    return FourierGrid(8)


@pytest.fixture(scope="session")
def grid16():
    return FourierGrid(16)


@pytest.fixture(scope="session")
def grid64():
    return FourierGrid(64)


def band_limited(grid: FourierGrid, rng: np.random.Generator) -> SpectralField:
    """Random real field with only dealias-retained modes."""
    values = rng.standard_normal((grid.n, grid.n))
    field = from_function(grid, lambda x1, x2: values)
    return field.masked()


def smooth_initial(grid: FourierGrid) -> SpectralField:
    """0.2cos(x1) + 0.1cos(2x2), the default initial data."""
    return InitialData().build(grid)


def constant_trajectory(field: SpectralField, times) -> Trajectory:
    """The same snapshot at every time in ``times``."""
    times = np.asarray(times, dtype=np.float64)
    coeffs = np.stack([field.coeffs] * times.size)
    return Trajectory(field.grid, times, coeffs)


@pytest.fixture
def log_schedule():
    return SigmaSchedule(SigmaKind.LOG_INVERSE, 0.5)


@pytest.fixture
def homotopy_spec():
    return ModelSpec(Model.CH_AC_HOMOTOPY, 0.1, 0.3, c_zero=0.0)


@pytest.fixture
def small_study(log_schedule):
    """
    A study small enough to run inline in a few seconds.

    n=16, T=0.1 with dt=0.01, two ε values, four samples, explicit C₀ = 0.
    """
    return StudyConfig(
        model=Model.CH_AC_HOMOTOPY,
        n=16,
        T=0.1,
        dt=0.01,
        eps_grid=(0.2, 0.1),
        schedule=log_schedule,
        samples=4,
        master_seed=7,
        c_zero=0.0,
    )


@pytest.fixture
def write_config(tmp_path):
    """
    Write a run config to a file and return its path.

    Example:
        def test_run(write_config):
            path = write_config({"n": 16, "renorm": {...}})
    """

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write
