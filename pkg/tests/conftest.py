import numpy as np
import pytest

from tendonarm.arm import default_arm, scenario_arm
from tendonarm.intersensory import OracleIntersensory


@pytest.fixture(scope="session")
def arm():
    return default_arm()


@pytest.fixture(scope="session")
def sarm():
    return scenario_arm()


@pytest.fixture(scope="session")
def oracle(sarm):
    return OracleIntersensory(sarm)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def random_pose(model, rng):
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    return rng.uniform(lo, hi)
