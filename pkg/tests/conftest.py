import pytest

from tgsum.numkit import Rng

from .helpers import make_model

ACCEPTANCE_LINES = []


@pytest.fixture
def tiny_model():
    return make_model()


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def criterion():
    """Record one acceptance line; printed again in the terminal summary."""
    def record(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
