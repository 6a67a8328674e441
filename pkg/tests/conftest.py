import numpy as np
import pytest
from hypothesis import settings

from scldpc.density import Density, GridSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(20.0, 256)


def random_density(grid, seed, inf_mass=None, support=None):
    """Random density; ``support`` limits the mass to that many random cells."""
    rng = np.random.default_rng(seed)
    mass = rng.random(grid.size) ** 4
    if support is not None:
        keep = rng.choice(grid.size, size=support, replace=False)
        sparse = np.zeros(grid.size)
        sparse[keep] = mass[keep]
        mass = sparse
    inf = rng.random() * 0.3 if inf_mass is None else inf_mass
    mass = mass / mass.sum() * (1.0 - inf)
    return Density(grid, mass, inf)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
