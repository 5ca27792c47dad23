"""Shared fixtures, plus end-of-run echo of the acceptance checklist.

The acceptance tests print one [PASS]/[FAIL] line each as they run; pytest
captures that output, so the same lines are replayed in the terminal
summary where they are visible regardless of capture settings.
"""

import pytest

_CRITERION_LINES: list[str] = []


@pytest.fixture(scope="session")
def criterion_report():
    """Record and print a one-line verdict for an acceptance criterion."""

    def _record(passed: bool, number: int, name: str, detail: str) -> str:
        tag = "PASS" if passed else "FAIL"
        line = f"[{tag}] criterion {number:2d} ({name}): {detail}"
        _CRITERION_LINES.append(line)
        print(line)
        return line

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
