"""Shared pytest hooks: one-line summary per acceptance criterion."""

import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    yield
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if status != "error" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            outcome = "PASSED" if status == "passed" else "FAILED"
            lines.append(f"[ACCEPTANCE] {name}: {outcome}")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
