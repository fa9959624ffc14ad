import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bergvar.geometry import make_domain
from bergvar.metric import make_weight

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_disc():
    return make_domain("polydisc", 1, radius=1.0)


@pytest.fixture
def flat():
    return make_weight("constant", 0, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
