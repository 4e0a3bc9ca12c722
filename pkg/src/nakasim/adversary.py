"""Adversary strategies: withholding, split releases and tie-break gaming.

The decisions themselves run inside the compiled round; the functions here
expose the same code on a live WorldState for inspection and tests.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernel as K


class AdversaryTag(str, Enum):
    NONE = "None"
    PRIVATE_CHAIN = "PrivateChain"
    SELECTIVE_RELEASE = "SelectiveRelease"
    LEX_GRIND = "LexGrind"
    FIRST_SEEN_SPLIT = "FirstSeenSplit"

    @property
    def code(self):
        return _CODES[self]


_CODES = {
    AdversaryTag.NONE: K.ADV_NONE,
    AdversaryTag.PRIVATE_CHAIN: K.ADV_PRIVATE,
    AdversaryTag.SELECTIVE_RELEASE: K.ADV_SELECTIVE,
    AdversaryTag.LEX_GRIND: K.ADV_LEXGRIND,
    AdversaryTag.FIRST_SEEN_SPLIT: K.ADV_FSSPLIT,
}


@dataclass
class AdversaryState:
    private_tips: list = field(default_factory=list)
    release_plan: dict = field(default_factory=dict)
    last_released: int | None = None


def adversary_state(world):
    """Snapshot of the adversary memory held in a world."""
    store = world.store
    priv = int(world.sc[K.S_PRIV])
    plan = {}
    for i in range(world.cfg.n - world.cfg.b):
        msgs = [store.chain(int(c)) for c in world.inbox[i, : world.inbox_n[i]]]
        if msgs:
            plan[i] = msgs
    rel = int(world.sc[K.S_REL])
    return AdversaryState([store.chain(priv)], plan, rel if rel > 0 else None)


def on_corrupt_mine(tag, state, successes, world, rng):
    """Let the adversary place the blocks its nodes mined in the current round.

    world.round is the round being played. Returns the refreshed state.
    """
    cfg = world.cfg
    tag = AdversaryTag(tag)
    succ = np.zeros(cfg.n, dtype=np.int64)
    for m in successes:
        if not cfg.n - cfg.b <= m < cfg.n:
            raise ValueError(f"node {m} is not corrupt")
        succ[m] = 1
    if tag is AdversaryTag.NONE or not successes:
        return adversary_state(world)
    world.reserve_blocks(len(successes))
    vec = world.cfg_vector().copy()
    vec[K.C_ADV] = tag.code
    base_n = int(world.sc[K.S_MLN])
    base = world.maxlayer[:base_n].copy()
    trig = world.sc[K.S_NADV] == 0 and world.sc[K.S_LAST] == K.KIND_HONEST
    made, _ = K.adv_mine(vec, world.round, succ, world.store.table, world.store.keys,
                         world.sc, world.maxlayer, base, base_n, int(world.sc[K.S_MAX]),
                         trig, rng, world.work[4], world.work[5])
    world.store.size = int(world.sc[K.S_SIZE])
    world.last_adversary_blocks = [int(x) for x in world.work[4][:made]]
    return adversary_state(world)


def plan_releases(tag, state, world, rng=None):
    """Fill next-round inboxes with the adversary's deliveries.

    Returns the refreshed state and {honest node: [Chain, ...]} in rank order.
    """
    tag = AdversaryTag(tag)
    cfg = world.cfg
    vec = world.cfg_vector().copy()
    vec[K.C_ADV] = tag.code
    made = len(world.last_adversary_blocks)
    newadv = np.array(world.last_adversary_blocks + [0], dtype=np.int64)
    fresh = np.array(world.last_honest_blocks + [0], dtype=np.int64)
    nxt = np.zeros((cfg.n, K.ICAP), dtype=np.int64)
    nxt_n = np.zeros(cfg.n, dtype=np.int64)
    if tag is not AdversaryTag.NONE:
        K.adv_release(vec, world.round, world.store.table, world.sc, world.tips, newadv, made,
                      fresh, len(world.last_honest_blocks), nxt, nxt_n, world.events)
    deliveries = {}
    for i in range(cfg.n):
        if nxt_n[i]:
            deliveries[i] = [world.store.chain(int(c)) for c in nxt[i, : nxt_n[i]]]
            for c in nxt[i, : nxt_n[i]]:
                world.deliver(i, int(c))
    return adversary_state(world), deliveries
