"""Shared pytest wiring for the suite.

The acceptance module records one verdict line per criterion; the terminal
summary hook reprints them after the run so they are visible regardless of
output capturing.
"""

import pytest

CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)
    print(line, flush=True)


@pytest.fixture(scope="session")
def criterion():
    """Recorder for one acceptance-criterion verdict line."""
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)
