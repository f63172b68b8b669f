import numpy as np
import pytest

from cedispatch import correction
from cedispatch.model import bundled, load_system
from cedispatch.relax import algorithm1


@pytest.fixture(scope="session")
def case14():
    return load_system(bundled("case14"))


@pytest.fixture(scope="session")
def stressed():
    return load_system(bundled("case14_stressed"))


@pytest.fixture(scope="session")
def hps14(case14):
    return algorithm1(case14)


@pytest.fixture(scope="session")
def stressed_run(stressed):
    return correction.outer_loop(stressed)


@pytest.fixture(scope="session")
def case14_run(case14, hps14):
    return correction.outer_loop(case14, hps14)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
