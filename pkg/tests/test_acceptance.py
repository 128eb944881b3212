"""Acceptance criteria A1-A15: one pass/fail line per criterion.

``FA2F_SUITE=full`` uses the stated sample sizes; the default is ``fast``.
The lines are printed in the pytest terminal summary and when this file
is run as a script.
"""

import math
import os
import sys

import pytest

from fa2f import acceptance, droplet
from fa2f.cli import main

MODE = os.environ.get("FA2F_SUITE", "fast")
LINES: dict = {}


@pytest.fixture(scope="module")
def results():
    return {}


@pytest.mark.parametrize("cid", list(acceptance.CRITERIA))
def test_criterion(cid, results):
    res = acceptance.run_criterion(cid, MODE)
    results[cid] = res
    LINES[cid] = res.line()
    print(res.report())
    assert res.passed, res.report()


def test_negative_control_broken_recursion(monkeypatch):
    """A deliberately wrong recursion must turn A1 red."""

    def broken(a, u, w):
        return 0.5 * a * math.log(u) if u > 0 else -math.inf, 0.0

    monkeypatch.setattr(droplet, "_recursion_log", broken)
    res = acceptance.run_criterion("A1", MODE)
    assert not res.passed


def test_unknown_mode():
    with pytest.raises(ValueError):
        acceptance.run_criterion("A1", "slow")


def test_suite_cli(capsys):
    assert main(["suite", "fast", "--only", "A3,A12"]) == 0
    out = capsys.readouterr().out
    assert "A3 PASS" in out and "A12 PASS" in out and "suite fast: 2/2 passed" in out
    assert main(["suite", "fast", "--only", "A99"]) == 2


if __name__ == "__main__":
    failed = 0
    for r in acceptance.run_suite(MODE):
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
