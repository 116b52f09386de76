from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from footpose.geom import Intrinsics
from footpose.pnp import load_default_foot_model

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return load_default_foot_model()


@pytest.fixture(scope="session")
def K():
    return Intrinsics(280.0, 280.0, 128.0, 128.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
