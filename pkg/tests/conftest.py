import math

import numpy as np
import pytest

from yukawa_ewald.studies import random_cloud

BOX = 2 * math.pi


@pytest.fixture(scope="session")
def cloud500():
    return random_cloud(500, BOX, seed=2024)


@pytest.fixture(scope="session")
def cloud10():
    return random_cloud(10, BOX, seed=7)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(99))
