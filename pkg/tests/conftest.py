"""Shared pytest wiring: the acceptance-criteria summary block.

Each test_criterion_* test in test_acceptance.py contributes one
"criterion NN <name>: PASS/FAIL" line to the terminal summary so the
whole gate can be read at a glance.
"""

import re

_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d{2})_([a-z0-9_]+)")
_results: dict[tuple[int, str], str] = {}


def pytest_runtest_logreport(report):
    match = _PATTERN.search(report.nodeid)
    if match is None:
        return
    key = (int(match.group(1)), match.group(2))
    if report.failed or report.skipped:
        # a skipped criterion was not demonstrated, so it does not pass
        _results[key] = "FAIL"
    elif report.when == "call" and report.passed:
        _results.setdefault(key, "PASS")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num, name in sorted(_results):
        label = name.replace("_", " ")
        terminalreporter.write_line(f"criterion {num:02d} {label}: {_results[(num, name)]}")
