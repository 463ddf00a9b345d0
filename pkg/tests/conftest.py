import numpy as np
import pytest
from hypothesis import settings

from topoprep.wen import build_lattice

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def lat2():
    return build_lattice(2)


@pytest.fixture(scope="session")
def lat4():
    return build_lattice(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state_vector(rng, n):
    from topoprep.states import StateVector

    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(v / np.linalg.norm(v))


def random_density(rng, n, rank=None):
    from topoprep.states import DensityMatrix

    d = 1 << n
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)
