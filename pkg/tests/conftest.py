import numpy as np
import pytest

from camduty.data import OccupancyThresholds


@pytest.fixture
def thresholds():
    return OccupancyThresholds()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
