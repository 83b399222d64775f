import math
from collections import OrderedDict

import numpy as np
import pytest

from pendulum_qubits.qstate import EnvelopeState

SQRT_HALF = 1.0 / math.sqrt(2.0)

_criteria: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test belongs to")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number, title = getattr(report, "criterion", (None, None))
    if number is None:
        return
    entry = _criteria.setdefault(number, {"title": title, "passed": [], "failed": []})
    name = report.nodeid.split("::")[-1]
    (entry["passed"] if report.outcome == "passed" else entry["failed"]).append(name)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args[:2])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if not e["failed"] else "FAIL"
        line = f"criterion {number} [{status}] {e['title']} ({len(e['passed'])}/{len(e['passed']) + len(e['failed'])} checks)"
        if e["failed"]:
            line += " failing: " + ", ".join(e["failed"])
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def singlet():
    return EnvelopeState(2, np.array([0.0, SQRT_HALF, -SQRT_HALF, 0.0]))
