import numpy as np
import pytest

from rydberg_crlb.quantum_model import build_surface, preset
from rydberg_crlb.response import frequency_marginal, intensity_marginal, split_lineshapes


@pytest.fixture(scope="session")
def system():
    return preset("rb85_effective")


@pytest.fixture(scope="session")
def surface(system):
    return build_surface(system)


@pytest.fixture(scope="session")
def fi(surface):
    return intensity_marginal(surface, 0.0)


@pytest.fixture(scope="session")
def fs15(surface):
    return frequency_marginal(surface, 15.0)


@pytest.fixture(scope="session")
def peaks15(fs15):
    return split_lineshapes(fs15)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
