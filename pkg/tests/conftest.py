import numpy as np
import pytest

from milne.domain import evaluate_energy_slice, reference_config
from milne.spectral import basis_at, harmonic_map

E_REF = 4.9


@pytest.fixture(scope="session")
def reference():
    return reference_config()


@pytest.fixture(scope="session")
def qmap(reference):
    return harmonic_map(reference[0], 20)


@pytest.fixture(scope="session")
def slice49(reference):
    pot, grid = reference
    return evaluate_energy_slice(pot, grid, E_REF)


@pytest.fixture(scope="session")
def pair49(reference, qmap):
    pot, grid = reference
    return basis_at(pot, grid, E_REF, qmap, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
