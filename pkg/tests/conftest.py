import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ccopt.problem import benchmark_problem

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def spec():
    return benchmark_problem()


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
