import numpy as np
import pytest

from muskatlab.core import FarField, Grid, InterfaceProfile
from muskatlab.scenarios import ScenarioSpec, make_profile

ACCEPTANCE_LINES = []


@pytest.fixture
def tanh_small():
    return make_profile(ScenarioSpec(kind="tanh_step", N=256))


@pytest.fixture
def bump_small():
    return make_profile(ScenarioSpec(kind="bump", a=0.0, b=0.0, amplitude=0.5, width=2.0, N=256))


def flat(value, N=128, L=40.0, tilt=0.0):
    g = Grid(L, N)
    return InterfaceProfile(g, np.full(N, value), FarField(value, value, tilt))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
