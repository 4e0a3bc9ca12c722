"""Clock-gated stand-in for a verifiable delay function and the chain check built on it."""

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from . import _kernel as K


class FutureOutputError(ValueError):
    """Requested an output for a round the clock has not reached."""


def _F(x: bytes) -> bytes:
    return hashlib.blake2b(x, digest_size=32).digest()


@dataclass
class VdfChainState:
    """Outputs y_0..y_j; y_{j+1} = F(y_j) | (j+1) and y_0 comes from input 0."""
    current_round: int = 0
    outputs: list = field(default_factory=list)

    def advance(self, round):
        if round < self.current_round:
            raise ValueError("the clock only moves forward")
        self.current_round = round


def vdf_output(state, round):
    if round < 0:
        raise ValueError("negative round")
    if round > state.current_round:
        raise FutureOutputError(f"output {round} not available at round {state.current_round}")
    out = state.outputs
    if not out:
        out.append(_F((0).to_bytes(8, "big")) + (0).to_bytes(8, "big"))
    while len(out) <= round:
        j = len(out)
        out.append(_F(out[-1]) + j.to_bytes(8, "big"))
    return out[round]


class Reason(str, Enum):
    DUPLICATE = "duplicate"
    NOT_INCREASING = "not_increasing"
    STALE = "stale"
    FUTURE = "future"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Reason | None = None
    block: int | None = None

    def __bool__(self):
        return self.accepted


ACCEPT = Verdict(True)


def check_rounds(vdf_rounds, round):
    """Check the embedded rounds r_1..r_l of a chain (genesis excluded).

    Scans forward and reports the first offending position.
    """
    prev = None
    seen = set()
    for k, r in enumerate(vdf_rounds, start=1):
        if r in seen:
            return Verdict(False, Reason.DUPLICATE, k)
        if prev is not None and r < prev:
            return Verdict(False, Reason.NOT_INCREASING, k)
        if r < k - 1:
            return Verdict(False, Reason.STALE, k)
        if r > round - 1:
            return Verdict(False, Reason.FUTURE, k)
        seen.add(r)
        prev = r
    return ACCEPT


def validate_chain(store, tip, round):
    """Accept or reject the chain ending at tip as seen during `round`."""
    path = store.ancestors(tip)[::-1][1:]
    verdict = check_rounds([int(store.table[b, K.VDF]) for b in path], round)
    if verdict:
        return verdict
    return Verdict(False, verdict.reason, path[verdict.block - 1])


def gate_accepts(store, tip, round):
    """Cached form used by the engine: parent status is stored per block."""
    return bool(K.acceptable(store.table, tip, round, True))

