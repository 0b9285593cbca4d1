import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wsscatter.solver import SolverConfig  # noqa: E402
from wsscatter.spectral import SpectralGrid, gaussian  # noqa: E402
from wsscatter.trajectory import LogTimeMesh  # noqa: E402


def small_cfg(T=0.5, span=3.0, n_steps=120, **kw):
    """A short mesh (ds = 0.025) for fast solver tests."""
    return SolverConfig(T=T, mesh=LogTimeMesh(math.log(T) - span, math.log(T), n_steps), **kw)


@pytest.fixture
def grid16():
    return SpectralGrid(16, 16.0)


@pytest.fixture
def grid8():
    return SpectralGrid(8, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid, rng):
    from wsscatter.spectral import Field
    return Field(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def small_gaussian(grid, amp=0.05, width=1.5):
    return gaussian(grid, amp, width)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
