import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ci", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def generic_points(rng, n, low=-2.0, high=2.0, min_sep=0.2):
    """Uniform points whose closest pair is at least ``min_sep`` diameters apart."""
    while True:
        P = rng.uniform(low, high, (n, 2))
        D = np.linalg.norm(P[:, None] - P[None], axis=-1)
        if D[np.triu_indices(n, 1)].min() >= min_sep * D.max():
            return P


# acceptance bookkeeping: one summary line per criterion
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    num, title = mark.args
    ok, _ = _criteria.get(num, (True, title))
    _criteria[num] = (ok and rep.passed, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        ok, title = _criteria[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")
