import numpy as np
import pytest

from roughwave.model import MediumParams
from roughwave.surface import make_profile


@pytest.fixture(scope="session")
def flat():
    return make_profile("flat")


@pytest.fixture(scope="session")
def bump():
    return make_profile("gaussian_bump", h=0.3, sigma=1.0)


@pytest.fixture(scope="session")
def fresnel_params(flat):
    return MediumParams.for_profile(flat, 3.0, 1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
