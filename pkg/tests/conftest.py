import numpy as np
import pytest
from hypothesis import settings

from greenblocks import BlockLowerTriangular

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_green_example():
    # eigenvalues -1 and 1: both half-planes populated
    return BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[-1.0]], (2, 1): [[1.0]], (2, 2): [[1.0]]})


@pytest.fixture
def scalar_exp_example():
    return BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[0.0]], (2, 1): [[1.0]], (2, 2): [[1.0]]})


def rel_err(X, Y):
    den = np.linalg.norm(Y)
    return np.linalg.norm(np.asarray(X) - np.asarray(Y)) / (den if den > 0 else 1.0)
