import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from artifact.dynamics import random_spec, reference_fixture

settings.register_profile("artifact", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("artifact")


@pytest.fixture
def spec():
    return reference_fixture()


@pytest.fixture
def rspec():
    return random_spec(2, np.random.default_rng(7))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
