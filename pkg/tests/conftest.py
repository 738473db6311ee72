import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def two_state():
    from tdprop_lab.mdp import Mdp
    return Mdp([[0.9, 0.1], [0.2, 0.8]], [1.0, 0.0], 0.9)


@pytest.fixture
def two_state_sym():
    from tdprop_lab.mdp import Mdp
    return Mdp([[0.6, 0.4], [0.4, 0.6]], [1.0, 0.0], 0.9)


def random_stochastic(rng, n):
    p = rng.exponential(size=(n, n))
    return p / p.sum(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---- acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and rep.passed:
        return
    num, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = _CRITERIA.get(num)
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    if prev and prev[0] == "FAIL":
        return
    _CRITERIA[num] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[num]
        line = f"{status} criterion {num}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
