"""Tie-breaking among equal-length longest chains."""

from enum import Enum

import numpy as np

from . import _kernel as K


class Strategy(str, Enum):
    UNIFORM_RANDOM = "UniformRandom"
    FIRST_SEEN = "FirstSeen"
    LEX_FIRST = "LexFirst"
    GLOBAL_COIN = "GlobalCoin"

    @property
    def code(self):
        return _CODES[self]


_CODES = {
    Strategy.UNIFORM_RANDOM: K.UNIFORM,
    Strategy.FIRST_SEEN: K.FIRST_SEEN,
    Strategy.LEX_FIRST: K.LEX_FIRST,
    Strategy.GLOBAL_COIN: K.GLOBAL_COIN,
}


class TieError(ValueError):
    """Candidates handed to a tie-break do not all have the same length."""


def priority(tip_key, epoch, coin_key=0):
    """Shared pseudorandom rank of a tip in a given epoch; lower wins."""
    return int(K.coin_priority(np.uint64(coin_key), epoch, np.uint64(tip_key)))


def choose(strategy, candidates, arrival_order=None, rng=None, coin_epoch=0, keys=None, coin_key=0):
    """Pick one chain among equal-length candidates.

    arrival_order gives each candidate's rank (own tip is 0). keys default to
    tip ids and define the lexicographic and coin orders.
    """
    strategy = Strategy(strategy)
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates")
    if len({c.length for c in candidates}) != 1:
        raise TieError("candidates differ in length")
    if len(candidates) == 1:
        return candidates[0]
    if arrival_order is None:
        arrival_order = range(len(candidates))
    order = np.argsort(np.asarray(arrival_order), kind="stable")
    ordered = [candidates[i] for i in order]
    if keys is None:
        key_arr = np.array([c.tip for c in ordered], dtype=np.uint64)
    else:
        key_arr = np.array([keys[i] for i in order], dtype=np.uint64)
    idx = np.arange(len(ordered), dtype=np.int64)
    if strategy is Strategy.UNIFORM_RANDOM:
        if rng is None:
            raise ValueError("UniformRandom needs a random stream")
        # same draw the engine makes
        return ordered[int(rng.integers(0, len(ordered)))]
    j = K.choose_index(strategy.code, idx, len(ordered), key_arr, coin_epoch, np.uint64(coin_key))
    return ordered[int(j)]
