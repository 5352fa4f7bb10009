import pytest

from hypflow.automaton import bundled_automaton
from hypflow.words import bundled_presentation


@pytest.fixture(scope="session")
def octagon():
    return bundled_presentation("octagon")


@pytest.fixture(scope="session")
def z4z6():
    return bundled_presentation("z4z6")


@pytest.fixture(scope="session")
def octagon_aut():
    return bundled_automaton("octagon")


@pytest.fixture(scope="session")
def z4z6_aut():
    return bundled_automaton("z4z6")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
