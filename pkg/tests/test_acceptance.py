"""The twelve acceptance criteria at their stated tolerances; one PASS/FAIL line each.

Run directly (``python tests/test_acceptance.py``) or through pytest, where the lines are
repeated in the terminal summary.
"""
import pytest

from nonlocal_bellman.acceptance import CRITERIA, run_criterion

LINES = []


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    r = run_criterion(k)
    LINES.append(r.line())
    print(r.line())
    failed = {name: r.measured for name, ok in r.checks.items() if not ok}
    assert r.passed, f"criterion {k} failed checks {sorted(failed)}; measured: {r.measured}"
    assert r.in_time, f"criterion {k} took {r.seconds:.1f}s (limit {r.limit}s)"


if __name__ == "__main__":
    import sys
    bad = 0
    for k in sorted(CRITERIA):
        r = run_criterion(k)
        print(r.line(), flush=True)
        bad += not (r.passed and r.in_time)
    sys.exit(1 if bad else 0)
