import sys

import numpy as np
import pytest

from thermotwin.core import make_windows, split_each
from thermotwin.models import ArxModel
from thermotwin.plant import TRAINING_RANGES, PlantConfig, training_trajectories


@pytest.fixture(scope="session")
def plant_cfg():
    return PlantConfig()


@pytest.fixture(scope="session")
def small_split(plant_cfg):
    """Train/validation windows from five short series over the wide range."""
    series = training_trajectories(TRAINING_RANGES[0], plant_cfg, n_series=5, length=120, seed=3)
    return split_each([make_windows(t) for t in series])


@pytest.fixture(scope="session")
def arx_model(small_split):
    trn, _ = small_split
    return ArxModel().fit(trn.X, trn.y)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "LINES", [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
