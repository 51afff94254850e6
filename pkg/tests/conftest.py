import numpy as np
import pytest

from fingertps import FingerModel
from fingertps.study import build_configuration


@pytest.fixture(scope="session")
def finger():
    return FingerModel.default()


@pytest.fixture(scope="session")
def ccc():
    """Baseline FDP configuration with central pulleys everywhere."""
    return build_configuration("C-C-C", {})


@pytest.fixture()
def rng():
    return np.random.default_rng(20260825)
