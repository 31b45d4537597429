import numpy as np
import pytest

from hypocns import Grid, SpectralField, State


def random_field(grid, rng, band=None, mean=True):
    x = rng.standard_normal((grid.n, grid.n))
    f = SpectralField.from_physical(grid, x)
    if band is not None:
        k = grid.xi_abs * grid.box_len / (2 * np.pi)
        f = f.with_coeffs(np.where(k <= band, f.coeffs, 0.0))
    return f if mean else f.without_mean()


def random_state(grid, rng, amp=1.0, band=None, mean=True):
    fs = [random_field(grid, rng, band, mean) * amp for _ in range(3)]
    return State(fs[0], (fs[1], fs[2]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid():
    return Grid(32, 2 * np.pi)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
