import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nevlab.maps import standard_exhaustion
from nevlab.quad import QuadPlan

settings.register_profile("nevlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nevlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def log_abs():
    return standard_exhaustion("logAbs", 1)


@pytest.fixture
def small_plan():
    return QuadPlan(budget=2**15)
