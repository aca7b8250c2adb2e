import numpy as np
import pytest

from hdldev.lattice import InitialProfile, Perturbation, RateFunction, ReactionSpec, TorusGrid


@pytest.fixture
def reaction():
    return ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(0.5))


@pytest.fixture
def no_reaction():
    return ReactionSpec(RateFunction.zero(), RateFunction.zero())


@pytest.fixture
def tilt():
    return Perturbation.sine_mode(0.3, 1)


@pytest.fixture
def initial():
    return InitialProfile.smooth(1.0, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return TorusGrid(8)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
