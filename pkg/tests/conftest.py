"""Shared fixtures and the acceptance-summary hook.

Acceptance tests register one result per criterion through
record_criterion; the terminal summary prints a single pass/fail line for
each, visible regardless of output capturing.
"""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, ok: bool, detail: str):
    ACCEPTANCE_RESULTS[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
