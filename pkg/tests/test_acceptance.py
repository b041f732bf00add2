"""Acceptance criteria 1-10, one test each.

Each test prints a PASS/FAIL line; the lines are repeated in the terminal
summary.  Run as a script for the lines alone::

    python tests/test_acceptance.py
"""

import re
import sys

import pytest

from qsdlab import acceptance

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []


@pytest.mark.parametrize("check", acceptance.CHECKS, ids=lambda c: f"{c.number:02d}_" + re.sub(r"\W+", "_", c.check_name).strip("_"))
def test_criterion(check):
    res = check()
    line = res.line()
    ACCEPTANCE_LINES.append((res.number, line))
    print(line)
    assert res.passed, line


if __name__ == "__main__":
    results = acceptance.run_all()
    sys.exit(0 if all(r.passed for r in results) else 3)
