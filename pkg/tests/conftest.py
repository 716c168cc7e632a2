import functools

import pytest

from femtogame import search

from helpers import assert_monotone

# Every search trace produced anywhere in the suite goes through this check.
MONOTONE_CHECKS = {"traces": 0, "records": 0}
_original_run_search = search.run_search


@functools.wraps(_original_run_search)
def _checked_run_search(*args, **kwargs):
    state = _original_run_search(*args, **kwargs)
    assert_monotone(state.trace)
    MONOTONE_CHECKS["traces"] += 1
    MONOTONE_CHECKS["records"] += len(state.trace)
    return state


search.run_search = _checked_run_search


@pytest.fixture
def monotone_checks():
    return MONOTONE_CHECKS


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
