import numpy as np
import pytest

from clickfield.signal import GridSpec

ACCEPTANCE_LINES = []


def random_state(grid, rng):
    v = rng.normal(size=grid.total_cells) + 1j * rng.normal(size=grid.total_cells)
    return v / grid.norm(v)


def random_orthonormal(grid, k, rng):
    """``k`` orthonormal modes (dV-weighted) from a complex QR."""
    m = grid.total_cells
    q, _ = np.linalg.qr(rng.normal(size=(m, k)) + 1j * rng.normal(size=(m, k)))
    return q.T / np.sqrt(grid.dV)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid4():
    return GridSpec((4,))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
