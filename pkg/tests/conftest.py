import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_network(rng, n=6, m=2, C=4, directed=True, include_diagonal=True):
    from depsbm.core import NetworkSequence

    y = rng.integers(1, C + 1, size=(m, n, n))
    if not directed:
        y = np.triu(y, 1)
        y = y + y.transpose(0, 2, 1)
        y[:, np.arange(n), np.arange(n)] = 1
    return NetworkSequence(y, C, directed, include_diagonal)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT):
            terminalreporter.write_line(line)
