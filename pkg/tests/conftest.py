import numpy as np
import pytest

from disorder_detect.oracle import enumerate_joint
from disorder_detect.reference import (
    example_model,
    no_information_model,
    reference_2state,
    reference_3state,
    sparse_model,
)
from disorder_detect.solver import solve_threshold


@pytest.fixture(scope="session")
def ref2():
    return reference_2state()


@pytest.fixture(scope="session")
def ref3():
    return reference_3state()


@pytest.fixture(scope="session")
def example():
    return example_model()


@pytest.fixture(scope="session")
def sparse():
    return sparse_model()


@pytest.fixture(scope="session")
def noinfo():
    return no_information_model()


@pytest.fixture(scope="session")
def ref2_solved(ref2):
    return solve_threshold(ref2)


@pytest.fixture(scope="session")
def ref3_solved(ref3):
    return solve_threshold(ref3)


@pytest.fixture(scope="session")
def joint_cache():
    cache = {}

    def get(model, horizon):
        key = (id(model), horizon)
        if key not in cache:
            cache[key] = enumerate_joint(model, horizon)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
