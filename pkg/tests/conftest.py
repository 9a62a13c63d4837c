import numpy as np
import pytest

from cournot_c4.env import Environment, PowerCost, random_env


@pytest.fixture
def small_env():
    return random_env(6, 4, seed=3)


def symmetric_env(n, m, c=0.3, rho=1.5, value=0.5):
    return Environment(np.full((n, m), value), [PowerCost(c, rho)] * n)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
