"""One test per acceptance criterion; each prints its pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or use
``nsbc acceptance`` for the JSON report.  Criterion 4 is expected to fail:
the detail printed with it lists the counterexamples found.
"""
from __future__ import annotations

import json

import pytest

from nsbc.acceptance import CRITERIA, run_criterion

SEED = 2024


@pytest.mark.parametrize("number", [num for num, _, _ in CRITERIA],
                         ids=[f"c{num:02d}-{name.replace(' ', '-')}" for num, name, _ in CRITERIA])
def test_criterion(number):
    r = run_criterion(number, SEED)
    print()
    print(r.line())
    print("   ", json.dumps(r.detail, sort_keys=True, default=str)[:600])
    assert r.passed, r.line()
