import numpy as np
import pytest

from wmspectra.wavemaps import shoot_profile

# acceptance lines collected by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def profiles():
    return {n: shoot_profile(n) for n in range(4)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
