import sys

import pytest

from qdrift.payoffs import Payoff
from qdrift.pricing import hamiltonian
from qdrift.statespace import make_gaussian


@pytest.fixture
def real_state():
    return make_gaussian(0.0, 0.2)


@pytest.fixture
def chirped_state():
    return make_gaussian(0.0, 0.2, 1.0)


@pytest.fixture
def boosted_state():
    return make_gaussian(0.0, 0.2, 0.0, 0.5)


@pytest.fixture
def free_h():
    return hamiltonian(0.2)


@pytest.fixture
def call():
    return Payoff("call")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
