import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lastpassage.weights import WeightModel

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def arithmetic_model():
    """P(v=1) = P(v=2) = 0.45, P(v=-inf) = 0.1."""
    return WeightModel.arithmetic({1: 0.45, 2: 0.45}, neg_inf_prob=0.1)


@pytest.fixture
def nonlattice_model():
    """-inf with probability 0.1, otherwise uniform(-0.5, 1.5)."""
    return WeightModel.uniform(-0.5, 1.5, neg_inf_prob=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
