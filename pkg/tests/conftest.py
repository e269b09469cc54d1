"""Shared pytest wiring for the acceptance gate.

test_acceptance.py appends one line per criterion to ``acceptance_log``;
this hook echoes them in the terminal summary so the pass/fail verdicts
are visible even under default output capture.
"""

import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log() -> list[str]:
    return _LINES


def pytest_terminal_summary(terminalreporter, exitstatus):
    if not _LINES:
        return
    terminalreporter.section("acceptance gate")
    for line in _LINES:
        terminalreporter.write_line(line)
