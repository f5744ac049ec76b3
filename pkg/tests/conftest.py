import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20230615)


def random_mask(rng, h, w, density=None):
    p = density if density is not None else rng.uniform(0.2, 0.8)
    return rng.random((h, w)) < p
