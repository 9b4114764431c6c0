import hypothesis
import numpy as np
import pytest

from btq.model_geometry import SymplecticModel
from btq.semiclassics import QuantumSpaceSolver

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=8, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def solver():
    return QuantumSpaceSolver()


@pytest.fixture(scope="session")
def torus1():
    return SymplecticModel.torus(1)


@pytest.fixture(scope="session")
def torus_var():
    return SymplecticModel.torus(2, np.pi)


@pytest.fixture(scope="session")
def plane():
    return SymplecticModel.plane(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
