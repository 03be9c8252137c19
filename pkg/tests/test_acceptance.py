"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The criteria share runs through a module-level cache (criterion 3 reuses
the runs of 1 and 2, criterion 4 those of 5-9), so they execute in the
suite order.
"""

import pytest

from apapc.acceptance import CRITERIA, FULL

LINES: list[str] = []


@pytest.fixture(scope="module")
def cache():
    return {}


@pytest.mark.parametrize("number", FULL, ids=[f"C{k}" for k in FULL])
def test_criterion(number, cache):
    result = CRITERIA[number](cache)
    line = result.line()
    LINES.append(line)
    print(line)
    assert result.passed, line
