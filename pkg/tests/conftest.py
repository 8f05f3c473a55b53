import warnings

import numpy as np
import pytest

from fracobstacle import core
from fracobstacle.scenario import obstacle_values

_ACCEPTANCE_LINES = []


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=RuntimeWarning, module="fracobstacle")


@pytest.fixture
def acceptance_line():
    """Record a one-line verdict; all lines are echoed in the terminal summary."""

    def emit(number, passed, text):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {text}"
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_spec(s=0.75, n=129, R=8.0, b=0.0, c=1.0, obstacle="bump", amplitude=1.0):
    g = core.GridSpec(R, n)
    phi = obstacle_values(obstacle, g.x, amplitude)
    return core.ProblemSpec(core.FractionalOrder(s), g, core.CoefficientSpec.constant(g, b, c),
                            core.ScalarField(g, phi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
