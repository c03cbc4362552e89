"""Every acceptance criterion at its stated tolerance, one test each.

The checks live in :mod:`igbm.validation` so that ``igbm validate`` and
this file run the same code. Each test records a one-line PASS/FAIL
summary printed at the end of the session. Nothing here is relaxed:
a criterion the model does not meet fails.
"""
import pytest

from igbm.validation import CHECKS, run_check


@pytest.mark.parametrize("cid", sorted(CHECKS))
def test_criterion(cid, acceptance_log):
    res = run_check(cid, workers=1)
    line = res.line() + f" [{res.seconds:.1f} s]"
    acceptance_log.append(line)
    print(line)
    assert res.passed, line
