from __future__ import annotations

import pytest

# criterion number -> (title, list of per-test outcomes)
_criteria: dict[int, tuple[str, list[str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    results = _criteria.setdefault(number, (title, []))[1]
    if report.skipped:
        results.append("skip")
    elif report.failed:
        results.append("fail")
    elif report.when == "call":
        results.append("pass")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, results = _criteria[number]
        if "fail" in results:
            status = "FAIL"
        elif all(r == "skip" for r in results):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"[{status}] AC{number}: {title} ({len(results)} check(s))")
