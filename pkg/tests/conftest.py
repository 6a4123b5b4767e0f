import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hydroelastic.elasticity import quadratic_model
from hydroelastic.spectral import StripGeometry

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def model():
    return quadratic_model(1.0, 1.0)


@pytest.fixture
def geom():
    return StripGeometry(1.0, 1.0, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
