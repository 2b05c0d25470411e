import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_cycle(gamma=0.5):
    from cbebf.mdp import FiniteMdp

    return FiniteMdp(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1.0, 0.0]), gamma)
