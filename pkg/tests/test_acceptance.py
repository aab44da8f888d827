"""Full-size acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line with the measured value and the
threshold.  Sample sizes and tolerances are the published ones (see
``emdsketch.acceptance``); run ``python tests/test_acceptance.py`` for the
same lines without pytest.
"""
import sys

import pytest

from emdsketch.acceptance import CHECKS

SEED = 7


@pytest.mark.parametrize("criterion", sorted(CHECKS), ids=lambda c: f"{c:02d}-{CHECKS[c].__name__}")
def test_criterion(criterion, capsys):
    import time
    t0 = time.perf_counter()
    out = CHECKS[criterion](SEED)
    out.seconds = time.perf_counter() - t0
    with capsys.disabled():
        print("\n" + out.line())
    assert out.passed, out.measured


if __name__ == "__main__":
    from emdsketch.acceptance import run_suite
    res = run_suite(seed=SEED)
    sys.exit(0 if all(o.passed for o in res) else 1)
