"""Acceptance reporting: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, name): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    # a failure in setup (e.g. a shared fixture) counts against the criterion too
    if marker is None or (report.when != "call" and not report.failed):
        return
    number, name = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _RESULTS[number] = (name, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        name, status, detail = _RESULTS[number]
        line = f"[{status}] {number:2d}. {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
