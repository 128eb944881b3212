import json
import sys
from pathlib import Path

import numpy as np
import pytest

from fa2f.lattice import BoundaryCondition, Config, Region

HERE = Path(__file__).parent


@pytest.fixture(scope="session")
def frozen():
    """Oracle values computed by tests/oracles/freeze.py before the suites were written."""
    return json.loads((HERE / "oracles" / "frozen.json").read_text())


# Infections of the 9 x 11 example drawn in the droplet figure, 0-indexed (x, y)
FIG1_INFECTED = [(1, 0), (2, 9), (3, 3), (3, 4), (3, 5), (3, 7), (5, 1), (7, 3)]


@pytest.fixture
def fig1():
    R = Region.rectangle(9, 11)
    cfg = Config.from_infected(R, FIG1_INFECTED)
    # the boundary column to the right is infected, the other sides healthy
    bc = BoundaryCondition.from_sides(R, right=np.zeros(11, dtype=np.uint8))
    return R, cfg, bc


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section(f"acceptance criteria ({mod.MODE})")
    for cid in sorted(lines, key=lambda c: int(c[1:])):
        terminalreporter.write_line(lines[cid])
