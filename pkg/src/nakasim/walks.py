"""Coalescing random walks on the complete graph with self-loops.

Laziness is system-wide: one coin per step decides whether every cluster
moves or every cluster stays. Two exact oracles are provided for small
systems, one over set partitions of the walkers and one over the number
of clusters.
"""

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from . import _kernel as K
from .chain import GENESIS, common_prefix


@dataclass
class WalkSystem:
    n_g: int
    u: float
    positions: np.ndarray
    alive: np.ndarray
    rep: np.ndarray
    steps: int = 0

    @classmethod
    def start(cls, n_g, u, k, rng=None, distinct=True):
        _check(n_g, u, k, distinct)
        if distinct:
            pos = np.arange(k, dtype=np.int64)
        else:
            pos = rng.integers(0, n_g, size=k).astype(np.int64)
        sys = cls(n_g, float(u), pos, np.ones(k, dtype=np.bool_), np.arange(k, dtype=np.int64))
        K._merge_initial(sys.positions, sys.alive, sys.rep, np.full(n_g, -1, dtype=np.int64))
        for i in range(k):
            sys.positions[i] = sys.positions[sys.rep[i]]
        return sys

    @property
    def clusters(self):
        return int(self.alive.sum())


def _check(n_g, u, k, distinct):
    if n_g < 1:
        raise ValueError("n_g must be at least 1")
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    if k < 1:
        raise ValueError("need at least one walker")
    if distinct and k > n_g:
        raise ValueError("more walkers than vertices with distinct starts")


def step_walks(sys, rng):
    if sys.clusters < 1:
        raise ValueError("no live walker")
    occ = np.full(sys.n_g, -1, dtype=np.int64)
    K.walk_step(sys.positions, sys.alive, sys.rep, sys.n_g, sys.u, rng, occ)
    sys.steps += 1
    return sys


def coalescence_times(n_g, u, k, runs, rng, distinct=True, cap=None):
    """Steps to a single cluster for `runs` independent systems."""
    _check(n_g, u, k, distinct)
    if cap is None:
        cap = np.iinfo(np.int64).max
    return K.coalescence_batch(n_g, float(u), k, runs, rng, distinct, cap)


def coalescence_time(n_g, u, k, rng, distinct=True):
    return int(coalescence_times(n_g, u, k, 1, rng, distinct)[0])


def walk_csv(rows):
    """rows of (n_g, u, k, seed, coalescence_time)."""
    buf = io.StringIO()
    buf.write("# schema=nakasim-walks/1\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("n_g", "u", "k", "seed", "coalescence_time"))
    w.writerows(rows)
    return buf.getvalue()


# exact oracles

def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _canon(blocks):
    return tuple(sorted(tuple(sorted(b)) for b in blocks))


def _falling(n, j):
    out = 1
    for i in range(j):
        out *= n - i
    return out


def partition_chain(k, n_g):
    """States and one-move transition laws of k coalescing walkers.

    A state is a set partition of the walkers into co-located clusters. On a
    move each cluster lands on a uniform vertex; clusters that collide merge.
    """
    states = [_canon(p) for p in _set_partitions(list(range(k)))]
    trans = {}
    for s in states:
        m = len(s)
        law = {}
        for grouping in _set_partitions(list(range(m))):
            j = len(grouping)
            pr = Fraction(_falling(n_g, j), n_g ** m)
            if pr == 0:
                continue
            nxt = _canon([sum((s[i] for i in g), ()) for g in grouping])
            law[nxt] = law.get(nxt, 0) + pr
        trans[s] = law
    return states, trans


def _solve(a, rhs):
    """Gaussian elimination over Fractions."""
    n = len(rhs)
    m = [row[:] + [rhs[i]] for i, row in enumerate(a)]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[piv] = m[piv], m[c]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c] / m[c][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [m[i][n] / m[i][i] for i in range(n)]


def exact_expected_coalescence(k, n_g, u=1):
    """Expected steps to absorption from k distinct singletons, as a Fraction."""
    if k > n_g:
        raise ValueError("more walkers than vertices")
    u = Fraction(u)
    states, trans = partition_chain(k, n_g)
    live = [s for s in states if len(s) > 1]
    idx = {s: i for i, s in enumerate(live)}
    a = [[Fraction(0)] * len(live) for _ in live]
    for s in live:
        i = idx[s]
        a[i][i] += 1
        # lazy step keeps the state
        a[i][i] -= 1 - u
        for nxt, pr in trans[s].items():
            if nxt in idx:
                a[i][idx[nxt]] -= u * pr
    e = _solve(a, [Fraction(1)] * len(live))
    start = _canon([[i] for i in range(k)])
    return e[idx[start]] if start in idx else Fraction(0)


def _stirling2(m, j):
    return sum((-1) ** i * comb(j, i) * (j - i) ** m for i in range(j + 1)) // _falling(j, j)


def occupancy_expected_coalescence(k, n_g, u=1):
    """Same quantity via the cluster-count chain: m clusters thrown into n_g bins."""
    u = Fraction(u)
    e = {1: Fraction(0)}
    for m in range(2, k + 1):
        stay = Fraction(_stirling2(m, m) * _falling(n_g, m), n_g ** m)
        acc = Fraction(1)
        for j in range(1, m):
            acc += u * Fraction(_stirling2(m, j) * _falling(n_g, j), n_g ** m) * e[j]
        e[m] = acc / (u * (1 - stay))
    return e[k]


# protocol side

@dataclass
class BackwardsWalks:
    miners: list
    rounds: list
    coalescence_step: int


def extract_backwards_walks(store, tips):
    """Miner sequences read from each tip back to genesis, and the step where they merge.

    Walkers start in the deepest layer; a walker whose tip is shallower waits
    there until the others reach its depth.
    """
    ids = sorted({int(t.tip if hasattr(t, "tip") else t) for t in tips})
    if not ids:
        raise ValueError("need at least one tip")
    miners, rounds = [], []
    for t in ids:
        path = store.ancestors(t)
        miners.append([store[b].miner if b != GENESIS else "genesis" for b in path])
        rounds.append([store[b].round for b in path])
    top = max(store.depth(t) for t in ids)
    cur = list(ids)
    s = 0
    while len(set(cur)) > 1:
        s += 1
        level = top - s
        cur = [store.parent(c) if store.depth(c) > level else c for c in cur]
    return BackwardsWalks(miners, rounds, s)


def coalescence_matches_prefix(store, tips):
    """Cross-check used in tests: merge step equals the prefix inconsistency."""
    return extract_backwards_walks(store, tips).coalescence_step == common_prefix(store, tips).max_inconsistency
