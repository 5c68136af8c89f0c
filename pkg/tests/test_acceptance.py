"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run directly (``python tests/test_acceptance.py``) to print only the
pass/fail lines.
"""

import pytest

from floquet_lap.acceptance import CRITERIA, run_criterion

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = run_criterion(number)
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.passed, line


if __name__ == "__main__":
    for k in sorted(CRITERIA):
        print(run_criterion(k).line())
