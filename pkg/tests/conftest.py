import numpy as np
import pytest

from blockslip.control import ControlField, ValueSet
from blockslip.grid import build_grid

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid1d():
    return build_grid(1, (0.0, 1.0), 8)


@pytest.fixture
def grid2d():
    return build_grid(2, (0.0, 1.0), 4)


def random_field(rng, grid, values=(0, 1, 2)):
    vs = ValueSet(tuple(values))
    return ControlField(grid, rng.choice(vs.array, size=grid.n_cells), vs)
