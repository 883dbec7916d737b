from __future__ import annotations

import sys
from collections import OrderedDict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_logreport(report):
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    num, title = crit
    entry = _results.setdefault(num, {"title": title, "failed": [], "passed": [], "time": 0.0})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["time"] += report.duration
        name = report.nodeid.split("::")[-1]
        (entry["passed"] if report.passed else entry["failed"]).append(name)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_results):
        e = _results[num]
        status = "PASS" if not e["failed"] else "FAIL"
        tr.write_line(f"criterion {num}: {status}  {e['title']}  ({e['time']:.1f} s)")
        for name in e["failed"]:
            tr.write_line(f"    failed: {name}")
