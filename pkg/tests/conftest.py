import numpy as np
import pytest

from decgmg.mesh import make_equilateral_grid, make_triangulated_grid
from decgmg.multigrid import build_hierarchy
from decgmg.subdivision import subdivision_tower

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def base_mesh():
    """The 25-vertex, 32-triangle equilateral strip mesh."""
    return make_equilateral_grid(4, 8)


@pytest.fixture(scope="session")
def unit_grid():
    return make_triangulated_grid(4, 4)


@pytest.fixture(scope="session")
def binary_tower(base_mesh):
    return subdivision_tower(base_mesh, "binary", 3)


@pytest.fixture(scope="session")
def hierarchy3(binary_tower):
    return build_hierarchy(binary_tower)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
