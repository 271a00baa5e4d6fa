"""Acceptance criteria 1-15 at their stated tolerances, one line per criterion.

Run directly (``python3 tests/test_acceptance.py``) for the plain report, or
through pytest, which repeats the lines in the terminal summary.
"""

import sys

import pytest

from rotorlab.acceptance import CRITERIA, SEED, run_criterion

RESULTS = {}


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number):
    res = run_criterion(number, SEED)
    RESULTS[number] = res
    print(res.line())
    assert res.passed, res.line()


def main() -> int:
    failed = 0
    for number in sorted(CRITERIA):
        res = run_criterion(number, SEED)
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"{len(CRITERIA) - failed}/{len(CRITERIA)} criteria passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
