import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, n, k, floor=0.0):
    raw = rng.dirichlet(np.ones(k), size=n)
    return floor + (1.0 - k * floor) * raw
