import numpy as np
import pytest

from vtolnav.selftest import random_landmarks, random_rotation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def rot(rng):
    return lambda: random_rotation(rng)


@pytest.fixture
def landmarks(rng):
    return lambda n=5: random_landmarks(rng, n)


# filled by the acceptance tests, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
