import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.skipped):
        outcome = report.outcome.upper()
        ACCEPTANCE_RESULTS[name] = "PASS" if outcome == "PASSED" else \
            "SKIP" if outcome == "SKIPPED" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    try:
        from test_acceptance import CRITERIA
    except Exception:
        CRITERIA = {}
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        desc = CRITERIA.get(name, name)
        terminalreporter.write_line(f"[{ACCEPTANCE_RESULTS[name]}] {desc}")
