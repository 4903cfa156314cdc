import numpy as np
import pytest

from fractalab.constants import load_constants
from fractalab.dyadic import DiscretizedSet
from fractalab.generators import derive_rng, frostman_random
from fractalab.geometry import TubeUniverse


@pytest.fixture(scope="session")
def frozen():
    """The shipped frozen-constants file; calibration must have run."""
    return load_constants()


@pytest.fixture(scope="session")
def universe2_16():
    """Width 2^-4 universe in the plane, shared across tests (construction
    dominates most test runtimes)."""
    return TubeUniverse(2.0 ** -4, 2)


@pytest.fixture(scope="session")
def universe2_64():
    return TubeUniverse(2.0 ** -6, 2)


@pytest.fixture(scope="session")
def universe3_16():
    return TubeUniverse(2.0 ** -4, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_set(label, d, level, t=None):
    """Seeded Frostman set; t defaults to a mid-range dimension."""
    g = derive_rng(0, label)
    return frostman_random(t if t is not None else 0.6 * d, d, level, g)


@pytest.fixture
def plane_set():
    return random_set("plane_set", 2, 6, t=1.3)
