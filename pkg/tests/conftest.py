import contextlib

import numpy as np
import pytest

from rvlbm import d2q9, lattice_constants

# acceptance criteria registry, printed as one pass/fail line each at the end
ACCEPTANCE_RESULTS = {}


@contextlib.contextmanager
def criterion(num, desc):
    try:
        yield
    except Exception:
        ACCEPTANCE_RESULTS[num] = (desc, False)
        raise
    ACCEPTANCE_RESULTS[num] = (desc, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        desc, passed = ACCEPTANCE_RESULTS[num]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status} - {desc}")


@pytest.fixture(scope="session")
def vset():
    return d2q9(1.0)


@pytest.fixture(scope="session")
def consts():
    return lattice_constants(1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
