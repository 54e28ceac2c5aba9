import numpy as np
import pytest
from hypothesis import settings

from delaylift.systems import SystemSpec, make_system

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def heat():
    return make_system(SystemSpec("heat"))


@pytest.fixture(scope="session")
def schrodinger():
    return make_system(SystemSpec("schrodinger"))


@pytest.fixture(scope="session")
def toy():
    return make_system(SystemSpec("toy"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
