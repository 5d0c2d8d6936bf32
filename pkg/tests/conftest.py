import pytest
from hypothesis import HealthCheck, settings

from loxolab.actions import CayleyTree, HyperbolicPlane, builtin_action
from loxolab.automaton import builtin_automaton
from loxolab.markov import build_chain

settings.register_profile("loxolab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("loxolab")

# filled by test_acceptance, printed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def f2():
    return builtin_automaton("free:2")


@pytest.fixture(scope="session")
def z23():
    return builtin_automaton("cyclic:2,3")


@pytest.fixture(scope="session")
def f2_chain(f2):
    return build_chain(f2)


@pytest.fixture(scope="session")
def z23_chain(z23):
    return build_chain(z23)


@pytest.fixture(scope="session")
def tree():
    return CayleyTree()


@pytest.fixture(scope="session")
def bass_serre():
    return builtin_action("bass-serre")


@pytest.fixture(scope="session")
def plane():
    return HyperbolicPlane()


@pytest.fixture(scope="session")
def quotient():
    return builtin_action("quotient")
