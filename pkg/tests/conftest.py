import numpy as np
import pytest

from nprach import NprachConfig


@pytest.fixture
def cfg8():
    return NprachConfig(preamble_groups=8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
