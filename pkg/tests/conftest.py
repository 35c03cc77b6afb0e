import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numerical property tests share one profile: no deadline (BLAS warm-up and
# cache effects make single-example timing meaningless) and a modest budget
settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one human-readable verdict line per acceptance criterion, echoed in the
# terminal summary (plain prints are swallowed by capture on passing tests)
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rand_sym(rng, dim, n=()):
    """Random symmetric tensors with entries O(1), shape n + (dim, dim)."""
    shape = (n,) if isinstance(n, int) else tuple(n)
    A = rng.standard_normal(shape + (dim, dim))
    return 0.5 * (A + np.swapaxes(A, -1, -2))
