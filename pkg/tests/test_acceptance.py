"""Acceptance criteria at their stated tolerances, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-check detail.
"""

from __future__ import annotations

import pytest

from depref.harness.verify import CRITERIA, SUITE_SEED, run_criterion

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n}")
def test_criterion(number, capsys):
    result = run_criterion(number, SUITE_SEED)
    with capsys.disabled():
        print()
        print("\n".join(result.lines()))
    failed = [c.label for c in result.checks if not c.passed]
    assert not failed, f"criterion {number} failed: {failed}"
