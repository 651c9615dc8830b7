import numpy as np
import pytest

from revdeconv.fixtures import shipped_config
from revdeconv.network import random_weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist():
    return shipped_config("mnist_dcgan")


@pytest.fixture(scope="session")
def celeba():
    return shipped_config("celeba_dcgan")


@pytest.fixture(scope="session")
def mnist_weights(mnist):
    return random_weights(mnist, np.random.default_rng(0))
