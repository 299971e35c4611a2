import os

import numpy as np
import pytest

from swldpc import builtin
from swldpc.construction import realize

DATA = os.path.join(os.path.dirname(__file__), "data")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running (minutes)")


@pytest.fixture(scope="session")
def reg36():
    return builtin.load_builtin("fig3_reg36")


@pytest.fixture(scope="session")
def small_code(reg36):
    return realize(reg36, 96, seed=3)


@pytest.fixture(scope="session")
def code_t1x6_2000():
    return realize(builtin.load_builtin("t1_x6"), 2000, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for key in sorted(RESULTS, key=str):
            terminalreporter.write_line(RESULTS[key])
