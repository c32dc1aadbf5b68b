import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def logistic_sample(rng, n, k, beta=None, intercept=0.0):
    X = rng.standard_normal((n, k))
    if beta is None:
        beta = rng.standard_normal(k) / np.sqrt(k)
    p = 1.0 / (1.0 + np.exp(-(intercept + X @ beta)))
    y = (rng.random(n) < p).astype(float)
    return X, y, np.asarray(beta)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
