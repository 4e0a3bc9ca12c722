"""Block tree storage, chain queries and DOT export."""

from dataclasses import dataclass

import numpy as np

from . import _kernel as K

GENESIS = K.GENESIS
GENESIS_MINER = -1


class ChainError(ValueError):
    """Base class for malformed block insertions."""


class StructuralError(ChainError):
    """Unknown parent or a self-referencing block."""


class OrderingError(ChainError):
    """Block round does not come after its parent's round."""


@dataclass(frozen=True)
class Block:
    id: int
    parent: int | None
    miner: int
    round: int
    honest: bool
    vdf_round: int
    depth: int
    key: int


@dataclass(frozen=True)
class Chain:
    """A chain identified by its tip; length counts genesis."""
    tip: int
    length: int


@dataclass(frozen=True)
class PrefixReport:
    prefix_tip: int
    common_prefix_len: int
    max_inconsistency: int
    honest_in_prefix: int

    @property
    def chain_quality(self):
        mined = self.common_prefix_len - 1
        return 1.0 if mined == 0 else self.honest_in_prefix / mined


class BlockStore:
    """Append-only block table with cached depth and honest counts.

    Ids are assigned sequentially from 1; genesis has id 0.
    """

    def __init__(self, capacity=64):
        capacity = max(int(capacity), 1)
        self.table = np.zeros((capacity, K.NCOL), dtype=np.int64)
        self.keys = np.zeros(capacity, dtype=np.uint64)
        self.table[GENESIS, K.PARENT] = K.NO_BLOCK
        self.table[GENESIS, K.MINER] = GENESIS_MINER
        self.table[GENESIS, K.DEPTH] = 1
        self.table[GENESIS, K.HONEST] = 1
        self.table[GENESIS, K.OK] = 1
        self.keys[GENESIS] = K.GENESIS_KEY
        self.size = 1
        self._children = None

    def __len__(self):
        return self.size

    def __contains__(self, bid):
        return 0 <= bid < self.size

    def __getitem__(self, bid):
        if bid not in self:
            raise KeyError(bid)
        row = self.table[bid]
        parent = None if bid == GENESIS else int(row[K.PARENT])
        return Block(int(bid), parent, int(row[K.MINER]), int(row[K.ROUND]),
                     bool(row[K.HONEST]), int(row[K.VDF]), int(row[K.DEPTH]),
                     int(self.keys[bid]))

    def reserve(self, extra):
        """Make room for `extra` more blocks."""
        need = self.size + extra
        cap = self.table.shape[0]
        if need <= cap:
            return
        cap = max(need, 2 * cap)
        table = np.zeros((cap, K.NCOL), dtype=np.int64)
        table[: self.size] = self.table[: self.size]
        keys = np.zeros(cap, dtype=np.uint64)
        keys[: self.size] = self.keys[: self.size]
        self.table, self.keys = table, keys

    def depth(self, bid):
        return int(self.table[bid, K.DEPTH])

    def parent(self, bid):
        return None if bid == GENESIS else int(self.table[bid, K.PARENT])

    def honest_count(self, bid):
        """Honest blocks on the path from genesis to bid, genesis excluded."""
        return int(self.table[bid, K.HCOUNT])

    def children(self, bid):
        if self._children is None or self._children[0] != self.size:
            kids = {}
            for c in range(1, self.size):
                kids.setdefault(int(self.table[c, K.PARENT]), []).append(c)
            self._children = (self.size, kids)
        return list(self._children[1].get(bid, ()))

    def ancestors(self, bid):
        """Ids from bid back to genesis inclusive."""
        out = [bid]
        while bid != GENESIS:
            bid = int(self.table[bid, K.PARENT])
            out.append(bid)
        return out

    def path(self, bid):
        """Blocks from genesis to bid."""
        return [self[i] for i in reversed(self.ancestors(bid))]

    def chain(self, bid):
        return Chain(int(bid), self.depth(bid))

    def extend(self, parent, miner, round, honest=True, vdf_round=None, strict=True, salt=0):
        """Add a block on `parent` and return its id.

        With strict=False a block may share its parent's round, which is how
        an ungated adversary stacks several blocks inside one round.
        """
        if parent not in self:
            raise StructuralError(f"unknown parent {parent}")
        prev = int(self.table[parent, K.ROUND])
        if round < 1 or round < prev or (strict and round == prev):
            raise OrderingError(f"round {round} does not follow parent round {prev}")
        if vdf_round is None:
            vdf_round = round - 1
        self.reserve(1)
        bid = self.size
        K.insert_block(self.table, self.keys, bid, parent, miner, round,
                       1 if honest else 0, vdf_round, salt)
        self.size += 1
        if self._children is not None and self._children[0] == bid:
            self._children[1].setdefault(parent, []).append(bid)
            self._children = (self.size, self._children[1])
        return bid


def extend(store, parent, miner, round, honest=True, vdf_round=None, strict=True):
    return store.extend(parent, miner, round, honest, vdf_round, strict)


def _as_ids(tips):
    return [t.tip if isinstance(t, Chain) else int(t) for t in tips]


def common_prefix(store, tips):
    """Deepest common ancestor of the given tips with inconsistency and quality."""
    ids = _as_ids(tips)
    if not ids:
        raise ValueError("need at least one tip")
    for t in ids:
        if t not in store:
            raise StructuralError(f"unknown tip {t}")
    arr = np.unique(np.asarray(ids, dtype=np.int64))
    pt = int(K.prefix_tip(store.table, arr, arr.shape[0]))
    cp = store.depth(pt)
    top = max(store.depth(t) for t in ids)
    return PrefixReport(pt, cp, top - cp, store.honest_count(pt))


def longest_tips(store, tips):
    """Distinct chains of maximal length among tips, in first-seen order."""
    ids = _as_ids(tips)
    if not ids:
        raise ValueError("need at least one candidate")
    top = max(store.depth(t) for t in ids)
    seen = []
    for t in ids:
        if store.depth(t) == top and t not in seen:
            seen.append(t)
    return [Chain(t, top) for t in seen]


def to_dot(store, tips=(), name="blocktree", palette=None):
    """Graphviz source for the block tree.

    Nodes are labelled miner@round; honest blocks and corrupt blocks get
    different fills, or per-miner colours when a palette is given.
    """
    highlight = set()
    for t in _as_ids(tips):
        highlight.update(store.ancestors(t))
    lines = [f"digraph {name} {{", "  rankdir=RL;", "  node [style=filled, shape=box];"]
    for bid in range(store.size):
        blk = store[bid]
        if bid == GENESIS:
            label, fill = "genesis", "white"
        else:
            label = f"{blk.miner}@{blk.round}"
            if palette is not None:
                fill = palette[blk.miner % len(palette)]
            else:
                fill = "palegreen" if blk.honest else "salmon"
        pen = ", penwidth=2" if bid in highlight else ""
        lines.append(f'  b{bid} [label="{label}", fillcolor="{fill}"{pen}];')
    for bid in range(1, store.size):
        lines.append(f"  b{bid} -> b{store.parent(bid)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
