"""Synchronous-round longest-chain protocol: configuration, state, stepping and traces."""

import csv
import dataclasses
import io
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernel as K
from .adversary import AdversaryTag, adversary_state
from .chain import BlockStore, Chain, PrefixReport
from .strategies import Strategy
from .vdf import VdfChainState

TRACE_SCHEMA = "nakasim-trace/1"
CSV_COLUMNS = ("t", "NB", "AB", "common_prefix_len", "max_inconsistency", "N",
               "honest_max_len", "adv_max_len")


@dataclass(frozen=True)
class SimConfig:
    n: int
    b: int = 0
    p: float = 1.0
    T: int = 100
    strategy: Strategy = Strategy.UNIFORM_RANDOM
    adversary: AdversaryTag = AdversaryTag.NONE
    selective_relay: bool = False
    vdf_mode: bool = False
    seed: int = 0
    # release a withheld chain that only ties the honest one
    release_on_tie: bool = False
    # salts LexGrind may try per parent candidate
    grind_budget: int = 16

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "adversary", AdversaryTag(self.adversary))
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 <= self.b < self.n:
            raise ValueError("need 0 <= b < n")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.grind_budget < 1:
            raise ValueError("grind_budget must be positive")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def vector(self):
        v = np.zeros(K.NCFG, dtype=np.int64)
        v[K.C_N] = self.n
        v[K.C_B] = self.b
        v[K.C_STRAT] = self.strategy.code
        v[K.C_ADV] = self.adversary.code
        v[K.C_RELAY] = int(self.selective_relay)
        v[K.C_VDF] = int(self.vdf_mode)
        v[K.C_TIE] = int(self.release_on_tie)
        v[K.C_GRIND] = self.grind_budget
        return v

    def as_dict(self):
        d = dataclasses.asdict(self)
        d["strategy"] = self.strategy.value
        d["adversary"] = self.adversary.value
        return d


class Streams(NamedTuple):
    mining: np.random.Generator
    strategy: np.random.Generator
    adversary: np.random.Generator
    coin_key: int


def make_streams(seed):
    """Independent named streams from one master seed."""
    m, s, a, c = np.random.SeedSequence(seed).spawn(4)
    coin = int(c.generate_state(1, dtype=np.uint64)[0])
    return Streams(np.random.default_rng(m), np.random.default_rng(s),
                   np.random.default_rng(a), coin)


@dataclass
class RoundStats:
    t: int
    NB: int
    AB: int
    honest_max_len: int
    adv_max_len: int
    honest_min_len: int
    prefix: PrefixReport
    N: int
    J: int
    n_longest: int
    releases: int
    rejected: int
    assumption_flag: int


@dataclass
class WorldState:
    cfg: SimConfig
    streams: Streams
    store: BlockStore
    tips: np.ndarray
    broadcast: np.ndarray
    inbox: np.ndarray
    inbox_n: np.ndarray
    stamp: np.ndarray
    maxlayer: np.ndarray
    work: np.ndarray
    sc: np.ndarray
    events: np.ndarray
    vdf_clock: VdfChainState
    round: int = 0
    last_honest_blocks: list = field(default_factory=list)
    last_adversary_blocks: list = field(default_factory=list)

    def cfg_vector(self):
        return self.cfg.vector()

    @property
    def honest(self):
        return self.cfg.n - self.cfg.b

    @property
    def local_tip(self):
        return [self.store.chain(int(t)) for t in self.tips[: self.honest]]

    @property
    def inboxes(self):
        """Chains waiting for each node at the start of the next round, in rank order."""
        common = [self.store.chain(int(c)) for c in self.broadcast[: self.sc[K.S_BCN]]]
        return [[self.store.chain(int(c)) for c in self.inbox[i, : self.inbox_n[i]]] + common
                for i in range(self.cfg.n)]

    @property
    def adversary_state(self):
        return adversary_state(self)

    @property
    def N(self):
        return int(self.sc[K.S_NADV])

    @property
    def J(self):
        return int(self.sc[K.S_J])

    def deliver(self, node, tip):
        """Queue an adversary message for node at the start of the next round."""
        k = self.inbox_n[node]
        if k >= self.inbox.shape[1]:
            raise OverflowError("inbox full")
        if tip not in self.store:
            raise KeyError(tip)
        self.inbox[node, k] = tip
        self.inbox_n[node] = k + 1

    def inject(self, parent, miner, round, vdf_round=None, strict=True):
        """Add an adversary-made block to the store outside the normal flow."""
        bid = self.store.extend(parent, miner, round, honest=False, vdf_round=vdf_round, strict=strict)
        self._sync_capacity()
        self.sc[K.S_SIZE] = self.store.size
        K.note_block(self.store.table, self.sc, self.maxlayer, bid, self.cfg.vdf_mode)
        return bid

    def reserve_blocks(self, extra):
        self.store.reserve(extra)
        self._sync_capacity()

    def _sync_capacity(self):
        cap = self.store.table.shape[0]
        if self.stamp.shape[0] < cap:
            stamp = np.zeros(cap, dtype=np.int64)
            stamp[: self.stamp.shape[0]] = self.stamp
            self.stamp = stamp
            layer = np.zeros(cap, dtype=np.int64)
            layer[: self.maxlayer.shape[0]] = self.maxlayer
            self.maxlayer = layer
            self.work = _work(self.cfg.n, cap)

    def reserve_events(self, rows):
        if self.events.shape[0] == 0:
            return
        used = int(self.sc[K.S_EVN])
        if self.events.shape[0] - used >= rows:
            return
        ev = np.zeros((max(2 * self.events.shape[0], used + rows), K.NEV), dtype=np.int64)
        ev[:used] = self.events[:used]
        self.events = ev


def _work(n, cap):
    return np.zeros((9, cap + 2 * n + K.ICAP + 2), dtype=np.int64)


def new_world(cfg, capacity=None, record_events=True):
    """World at round 0: genesis only, every node holding it."""
    n = cfg.n
    if capacity is None:
        capacity = 1 + n * cfg.T
    store = BlockStore(capacity)
    sc = np.zeros(K.NSC, dtype=np.int64)
    sc[K.S_SIZE] = 1
    sc[K.S_MAX] = 1
    sc[K.S_MLN] = 1
    maxlayer = np.zeros(capacity, dtype=np.int64)
    maxlayer[0] = K.GENESIS
    ev_rows = cfg.T * (n + 8) if record_events else 0
    return WorldState(
        cfg=cfg,
        streams=make_streams(cfg.seed),
        store=store,
        tips=np.zeros(n, dtype=np.int64),
        broadcast=np.zeros(2 * n, dtype=np.int64),
        inbox=np.zeros((n, K.ICAP), dtype=np.int64),
        inbox_n=np.zeros(n, dtype=np.int64),
        stamp=np.zeros(capacity, dtype=np.int64),
        maxlayer=maxlayer,
        work=_work(n, capacity),
        sc=sc,
        events=np.zeros((ev_rows, K.NEV), dtype=np.int64),
        vdf_clock=VdfChainState(),
    )


def _events_per_round(n):
    return n * (2 * K.ICAP + 2)


def step(state, cfg=None, rng=None):
    """Play round state.round + 1 in place; returns (state, RoundStats)."""
    cfg = state.cfg if cfg is None else cfg
    rng = state.streams if rng is None else rng
    if state.round >= cfg.T:
        raise ValueError("horizon reached")
    t = state.round + 1
    state.reserve_blocks(cfg.n)
    state.reserve_events(_events_per_round(cfg.n))
    row = np.zeros(K.NREC, dtype=np.int64)
    K.play_round(t, cfg.vector(), cfg.p, np.uint64(rng.coin_key), rng.mining, rng.strategy,
                 rng.adversary, state.store.table, state.store.keys, state.sc, state.tips,
                 state.broadcast, state.inbox, state.inbox_n, state.stamp, state.maxlayer,
                 state.work, row, state.events)
    state.store.size = int(state.sc[K.S_SIZE])
    state.round = t
    state.vdf_clock.advance(t)
    state.last_honest_blocks = [int(c) for c in state.broadcast[: state.sc[K.S_BCN]]]
    return state, _stats(row)


def _stats(row):
    r = [int(x) for x in row]
    prefix = PrefixReport(r[K.R_PTIP], r[K.R_CP], r[K.R_INC], r[K.R_PHON])
    return RoundStats(r[K.R_T], r[K.R_NB], r[K.R_AB], r[K.R_HMAX], r[K.R_AMAX], r[K.R_HMIN],
                      prefix, r[K.R_N], r[K.R_J], r[K.R_NLONG], r[K.R_REL], r[K.R_REJ],
                      r[K.R_FLAG])


_CHUNK = 512


def run(cfg, record_events=True, keep_world=True):
    """Play all T rounds and return the trace; a pure function of cfg."""
    world = new_world(cfg, record_events=record_events)
    rows = np.zeros((cfg.T, K.NREC), dtype=np.int64)
    vec = cfg.vector()
    s = world.streams
    coin = np.uint64(s.coin_key)
    t = 1
    while t <= cfg.T:
        t1 = min(cfg.T, t + _CHUNK - 1)
        world.reserve_events(_events_per_round(cfg.n) * (t1 - t + 1))
        K.run_rounds(t, t1, vec, cfg.p, coin, s.mining, s.strategy, s.adversary,
                     world.store.table, world.store.keys, world.sc, world.tips, world.broadcast,
                     world.inbox, world.inbox_n, world.stamp, world.maxlayer, world.work,
                     rows[t - 1: t1], world.events)
        t = t1 + 1
    world.store.size = int(world.sc[K.S_SIZE])
    world.round = cfg.T
    world.vdf_clock.advance(cfg.T)
    world.last_honest_blocks = [int(c) for c in world.broadcast[: world.sc[K.S_BCN]]]
    events = world.events[: world.sc[K.S_EVN]].copy()
    return ProcessTrace(cfg, rows, events, world if keep_world else None)


EVENT_KINDS = {K.EV_RELEASE: "release", K.EV_REJECT: "reject", K.EV_RELAY: "relay"}


@dataclass
class ProcessTrace:
    cfg: SimConfig
    records: np.ndarray
    events: np.ndarray
    world: WorldState | None = None

    def __len__(self):
        return self.records.shape[0]

    def __getitem__(self, name):
        return self.records[:, K.RECORD_COLUMNS.index(name)]

    def round(self, t):
        return _stats(self.records[t - 1])

    @property
    def summary(self):
        last = self.round(len(self))
        cp = last.prefix.common_prefix_len
        flags = self["assumption_flag"]
        return {
            "common_prefix_len": cp,
            "max_inconsistency": last.prefix.max_inconsistency,
            "peak_inconsistency": int(self["max_inconsistency"].max()),
            "mean_inconsistency": float(self["max_inconsistency"].mean()),
            "growth_rate": (cp - 1) / self.cfg.T,
            "chain_quality": last.prefix.chain_quality,
            "honest_max_len": last.honest_max_len,
            "adv_max_len": last.adv_max_len,
            "N": last.N,
            "J": last.J,
            "assumption_rounds": int((flags > 0).sum()),
            "fallback_rounds": int((flags == 2).sum()),
            "releases": int(self["releases"].sum()),
            "rejected": int(self["rejected"].sum()),
        }

    def event_rows(self):
        return [(int(t), EVENT_KINDS[int(k)], int(node), int(tip), int(info))
                for t, k, node, tip, info in self.events]

    def to_csv(self, path=None):
        buf = io.StringIO()
        buf.write(f"# schema={TRACE_SCHEMA}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        idx = [K.RECORD_COLUMNS.index(c) for c in CSV_COLUMNS]
        w.writerows(self.records[:, idx].tolist())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None):
        doc = {
            "schema": TRACE_SCHEMA,
            "config": self.cfg.as_dict(),
            "columns": list(K.RECORD_COLUMNS),
            "records": self.records.tolist(),
            "events": self.event_rows(),
            "summary": self.summary,
        }
        text = json.dumps(doc, indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def check_invariants(trace):
    """Rounds violating each run invariant that applies to the trace's config."""
    cfg = trace.cfg
    t = trace["t"]
    hmax = trace["honest_max_len"]
    out = {}
    out["advantage"] = t[trace["adv_max_len"] > hmax + trace["N"]]
    if cfg.vdf_mode:
        out["vdf_length"] = t[np.maximum(hmax, trace["adv_max_len"]) > t + 1]
    if cfg.b == 0:
        out["honest_spread"] = t[hmax - trace["honest_min_len"] > 1]
    if cfg.selective_relay and cfg.b > 0:
        prev = np.concatenate([[1], hmax[:-1]])
        bad = (hmax < prev) | ((trace["NB"] >= 1) & (hmax < prev + 1))
        out["relay_growth"] = t[bad]
    return out


def honest_tips(world):
    return [Chain(int(c), world.store.depth(int(c))) for c in np.unique(world.tips[: world.honest])]
