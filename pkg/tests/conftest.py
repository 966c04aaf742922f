import warnings

import numpy as np
import pytest

from jumpgp.gp import MLEConvergenceWarning

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_configure(config):
    warnings.filterwarnings("ignore", category=MLEConvergenceWarning)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
