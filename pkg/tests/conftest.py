import numpy as np
import pytest

from shiftrecover.imagecore import synth_dataset


@pytest.fixture(scope="session")
def desk():
    return synth_dataset(2000, seed=0)


@pytest.fixture(scope="session")
def small():
    return synth_dataset(64, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from oracles import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
