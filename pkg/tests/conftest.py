import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rvroot.array_model import Scenario, UlaConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def reference():
    return Scenario(UlaConfig(9, 0.5), (30.0, 50.0), snapshots=200, seed=2025)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
