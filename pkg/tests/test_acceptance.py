"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL summary that is printed at the end
of the pytest run (and directly when run as a script).
"""
import sys

import pytest

from forbidlab.acceptance import CRITERIA, AcceptanceContext, run_criterion

LINES = []


@pytest.fixture(scope="module")
def ctx():
    return AcceptanceContext()


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=[f"c{k:02d}_{CRITERIA[k][0].replace(' ', '_')}"
                                                          for k in sorted(CRITERIA)])
def test_criterion(number, ctx):
    res = run_criterion(number, ctx)
    LINES.append(res.line())
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    c = AcceptanceContext()
    ok = True
    for k in sorted(CRITERIA):
        r = run_criterion(k, c)
        print(r.line(), flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
