"""Acceptance criteria, one test each at the published tolerances.

Each check prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run standalone with ``python tests/test_acceptance.py``.
"""

import sys

import pytest

from gaplab.acceptance import CHECKS, run_suite

SLOW = {1, 2, 3, 7, 11}
RESULTS = []


@pytest.mark.parametrize(
    "number",
    [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n for n in CHECKS],
    ids=[f"{n:02d}-{CHECKS[n].__name__.removeprefix('check_')}" for n in CHECKS],
)
def test_criterion(number):
    res = CHECKS[number]()
    RESULTS.append(res)
    print(res.line())
    assert res.passed, res.line() + f" details={res.details}"


if __name__ == "__main__":
    results = run_suite("core")
    sys.exit(0 if all(r.passed for r in results) else 1)
