import numpy as np
import pytest

from dockopt.vehicle import build_apollo_csm


@pytest.fixture(scope="session")
def apollo():
    return build_apollo_csm()


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)


def random_unit_quaternion(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_state(rng, pos_scale=10.0, vel_scale=0.2, rate_scale=0.03):
    """A physically plausible chaser state vector."""
    x = np.empty(13)
    x[0:3] = rng.uniform(-pos_scale, pos_scale, 3)
    x[3:6] = rng.uniform(-vel_scale, vel_scale, 3)
    x[6:10] = random_unit_quaternion(rng)
    x[10:13] = rng.uniform(-rate_scale, rate_scale, 3)
    return x
