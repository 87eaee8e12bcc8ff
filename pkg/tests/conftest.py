"""Pytest configuration and shared fixtures for miworlds tests."""
import tempfile
from pathlib import Path

import numpy as np
import pytest

from miworlds.core import PhysicalParams, WorldEnsemble
from miworlds.density import DensityModel, sample_worlds


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def unit_params():
    """hbar = m = omega = 1."""
    return PhysicalParams()


@pytest.fixture
def frame_params():
    """Constants of the dimensionless oscillator frame."""
    return PhysicalParams.dimensionless()


@pytest.fixture
def rng():
    """Seeded generator so randomized ensembles are reproducible."""
    return np.random.default_rng(20241017)


@pytest.fixture
def make_ensemble(rng):
    """Factory for strictly ordered, centred positions with gaps 1 +- spread."""

    def _make(n_worlds, spread=0.2):
        gaps = 1.0 + rng.uniform(-spread, spread, size=n_worlds - 1)
        x = np.concatenate([[0.0], np.cumsum(gaps)])
        return x - x.mean()

    return _make


@pytest.fixture
def random_ensembles(rng, make_ensemble):
    """A list of 100 ordered ensembles with sizes between 7 and 50."""
    sizes = rng.integers(7, 51, size=100)
    return [make_ensemble(int(n)) for n in sizes]


@pytest.fixture
def ground_50():
    """Equal-area ground-state ensemble of 50 worlds."""
    return sample_worlds(DensityModel.ground(), 50)


@pytest.fixture
def excited_40():
    """Equal-area first-excited ensemble of 40 worlds."""
    return sample_worlds(DensityModel.excited(), 40)


@pytest.fixture
def uniform_ensemble():
    """Eleven equally spaced worlds."""
    return WorldEnsemble(np.linspace(-1.0, 1.0, 11))


@pytest.fixture
def write_config(temp_dir):
    """Write a YAML run configuration and return its path."""
    import yaml

    def _write(config, name="run.yaml"):
        path = temp_dir / name
        with open(path, "w") as f:
            yaml.safe_dump(config, f)
        return path

    return _write
