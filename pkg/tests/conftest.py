import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(seed, n=20, m=8, r=3):
    """Nonnegative X, factors and signed-label-ready {0,1} labels with both classes."""
    g = np.random.default_rng(seed)
    X = g.uniform(0.0, 2.0, (n, m))
    U = g.uniform(0.1, 1.0, (n, r))
    V = g.uniform(0.1, 1.0, (r, m))
    y = np.arange(n) % 2
    g.shuffle(y)
    w = g.normal(0.0, 1.0, r)
    b = float(g.normal())
    return X, U, V, y, w, b
