import numpy as np
import pytest
from hypothesis import settings

from ssvb.core_math import validate_dataset

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def gaussian_data(seed, n, p, beta=None, sigma=1.0, kind="continuous"):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    b = np.zeros(p) if beta is None else np.asarray(beta, dtype=float)
    y = X @ b + sigma * rng.standard_normal(n)
    return validate_dataset(X, y, kind)


@pytest.fixture
def make_data():
    return gaussian_data


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
