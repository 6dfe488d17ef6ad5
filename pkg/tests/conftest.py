# tests/conftest.py

import numpy as np
import pytest

from src import config
from src.homogeneous import Euclidean, Randers, Zero
from src.metrics import build_k0, closed_metric


@pytest.fixture
def rng():
    return np.random.default_rng(config.SEED)


@pytest.fixture
def euclid():
    return Euclidean()


@pytest.fixture
def minkowski():
    """F(x, y) = |y| on the whole plane."""
    return build_k0(Euclidean(), Zero())


@pytest.fixture
def randers_minkowski():
    return build_k0(Randers([0.5, 0.0]), Zero())


@pytest.fixture
def berwald():
    return closed_metric("berwald")


@pytest.fixture
def hilbert_ball():
    return closed_metric("hilbert_ball")


@pytest.fixture
def funk_ball():
    return closed_metric("euclid_funk")


@pytest.fixture
def sphere():
    return closed_metric("riemann", lam=1.0)


@pytest.fixture
def bryant():
    return closed_metric("bryant", alpha=0.3)
