import numpy as np
import pytest

from cmcurves.dynamics import PhasePoint, near_equilibrium_point
from cmcurves.elliptic import lattice_invariants


@pytest.fixture(scope="session")
def square():
    """Lattice Z + iZ."""
    return lattice_invariants(1j)


@pytest.fixture(scope="session")
def skewed():
    return lattice_invariants(0.3 + 1.1j)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_particles(square):
    x = np.array([0.1 + 0.2j, 0.45 + 0.55j, 0.8 + 0.15j])
    q = np.array([0.3 - 0.1j, -0.2 + 0.25j, 0.05 - 0.4j])
    return PhasePoint(x, q, square)


@pytest.fixture
def calm_three(square):
    """Three particles close to the cyclic equilibrium along 1 + i."""
    return near_equilibrium_point(3, square, np.random.default_rng(7))
