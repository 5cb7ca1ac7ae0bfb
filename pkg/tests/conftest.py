import re

import pytest
from hypothesis import HealthCheck, settings

from flatcheck.cli import load_system
from flatcheck.fixtures import path as fixture_path

settings.register_profile(
    "flatcheck",
    max_examples=200,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("flatcheck")


@pytest.fixture(scope="session")
def motor_file():
    return load_system(fixture_path("motor"))


@pytest.fixture(scope="session")
def motor(motor_file):
    return motor_file.sys


@pytest.fixture(scope="session")
def dim5_file():
    return load_system(fixture_path("dim5"))


@pytest.fixture(scope="session")
def brunovsky_file():
    return load_system(fixture_path("brunovsky"))


@pytest.fixture(scope="session")
def chained_file():
    return load_system(fixture_path("chained"))


# ---- one summary line per acceptance criterion

_CRITERION = re.compile(r"test_c(\d+)_")
_outcomes = {}
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = _CRITERION.match(item.name)
        if m and item.module.__name__.endswith("test_acceptance"):
            n = int(m.group(1))
            _titles.setdefault(n, getattr(item.module, "CRITERIA", {}).get(n, ""))
            _outcomes.setdefault(n, [])


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    m = _CRITERION.match(name)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes.setdefault(int(m.group(1)), []).append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        res = _outcomes[n]
        ok = bool(res) and all(o == "passed" for _, o in res)
        bad = [t for t, o in res if o != "passed"]
        line = "criterion %d: %s  %s" % (n, "PASS" if ok else "FAIL", _titles.get(n, ""))
        if bad:
            line += "  (failed: %s)" % ", ".join(bad)
        terminalreporter.write_line(line)
