import numpy as np
import pytest

from sagin_isac.scenario import load_scenario, trajectory
from sagin_isac.sca import Problem

# lines reported by test_acceptance.py, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def scenario():
    return load_scenario()


@pytest.fixture(scope="session")
def contexts(scenario):
    return trajectory(scenario)


@pytest.fixture(scope="session")
def problem(scenario):
    return Problem.build(scenario)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
