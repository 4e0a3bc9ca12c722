import numpy as np
import pytest

from nakasim.chain import GENESIS, BlockStore

PINK, YELLOW, GREEN, BLUE = range(4)
COLOURS = ("pink", "yellow", "green", "blue")

# parent of every block in the eight-round example, by round then miner.
# Blocks are numbered 4(r-1) + miner + 1, pink first. Blocks off the four
# final chains are hung on an arbitrary block of the previous round.
FIG1_PARENTS = {
    1: (GENESIS, GENESIS, GENESIS, GENESIS),
    2: (4, 4, 4, 4),
    3: (6, 6, 6, 6),
    4: (10, 10, 10, 10),
    5: (15, 15, 15, 15),
    6: (19, 19, 19, 18),
    7: (24, 21, 22, 22),
    8: (26, 26, 27, 25),
}
FIG1_TIPS = (32, 29, 30, 31)


@pytest.fixture
def fig1_store():
    store = BlockStore()
    for r in range(1, 9):
        for m in range(4):
            bid = store.extend(FIG1_PARENTS[r][m], m, r)
            assert bid == 4 * (r - 1) + m + 1
    return store


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[num])
