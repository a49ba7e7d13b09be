"""Collects one summary line per acceptance criterion (see test_acceptance.py)."""

import re

import pytest

_RESULTS: dict[int, dict] = {}


@pytest.fixture
def record(request):
    """``record(number, title, detail)`` stores the measured numbers for the summary."""

    def _record(number: int, title: str, detail: str) -> None:
        _RESULTS.setdefault(number, {}).update(title=title, detail=detail)

    return _record


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    entry = _RESULTS.setdefault(int(m.group(1)), {})
    if report.when == "call" or report.failed:
        entry["passed"] = report.passed and entry.get("passed", True)
        if report.failed and report.longrepr is not None:
            entry["error"] = str(getattr(report.longrepr, "reprcrash", report.longrepr)).splitlines()[-1]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry.get("passed") else "FAIL"
        line = f"criterion {number:2d} [{entry.get('title', '?')}]: {status}"
        if entry.get("detail"):
            line += f" | {entry['detail']}"
        if status == "FAIL" and entry.get("error"):
            line += f" | {entry['error']}"
        terminalreporter.write_line(line)
