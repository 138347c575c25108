"""Acceptance bookkeeping: one PASS/FAIL line per criterion after the run."""

from collections import defaultdict

import pytest

_results: dict[int, list] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _titles[mark.args[0]] = mark.args[1]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    # a criterion passes only if every phase of every test in it does
    if report.when == "call" or report.failed or report.skipped:
        details = [v for k, v in item.user_properties if k == "measured"]
        _results[mark.args[0]].append((item.name, report.passed and report.when == "call", details))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_results):
        runs = _results[number]
        ok = all(passed for _, passed, _ in runs)
        tr.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {_titles.get(number, '')}")
        for name, passed, details in runs:
            note = "; ".join(details)
            tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {name}{': ' + note if note else ''}")
