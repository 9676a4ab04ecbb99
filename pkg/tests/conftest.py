import numpy as np
import pytest


def rand_spsd(rng, n, rank=None):
    """Independent SPSD generator for oracles (plain Gram matrix)."""
    G = rng.standard_normal((n, rank or n))
    return G @ G.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
