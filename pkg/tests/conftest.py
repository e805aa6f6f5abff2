import numpy as np
import pytest

from roughflow import Field, RoughFieldSpec, make_grid, synth_rough_field


@pytest.fixture(scope="session")
def g2():
    return make_grid(2, 32)


@pytest.fixture(scope="session")
def g3():
    return make_grid(3, 16)


def rough(grid, alpha=3.0, seed=0, k_max=None, scalar=False, div_free=None, mean_zero=True):
    k_max = k_max or max(1, grid.N // 4)
    if scalar:
        spec = RoughFieldSpec(alpha, seed, mean_zero, False, k_max, 1)
    else:
        spec = RoughFieldSpec(alpha, seed, mean_zero, True if div_free is None else div_free, k_max)
    return synth_rough_field(spec, grid)


def sample(grid, func):
    return Field.from_function(grid, func)


def l2(f):
    return float(np.sqrt(np.sum(f.values**2) * f.grid.cell_volume))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
