"""Named experiments, one per reproducibility check, runnable from the CLI.

Each preset takes a replica count (None for the full-scale default) and a
base seed, and returns a PresetResult whose CSV is a pure function of both.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernel as K
from .adversary import AdversaryTag
from .bounds import (all_bounds, honest_majority_p_bound, inconsistency_theorem_params,
                     opportunity_lower_bound, theorem_probability)
from .chain import GENESIS, BlockStore, to_dot
from .engine import SimConfig, honest_tips, run
from .experiment import ROW_COLUMNS, ExperimentSpec, rows_to_csv, run_experiment
from .vdf import check_rounds, gate_accepts
from .walks import coalescence_times, exact_expected_coalescence


@dataclass
class PresetResult:
    name: str
    header: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    @property
    def csv(self):
        return rows_to_csv(self.header, self.rows, schema=f"nakasim-preset/{self.name}/1")

    def column(self, name, **where):
        i = self.header.index(name)
        keep = [(self.header.index(k), v) for k, v in where.items()]
        return np.array([r[i] for r in self.rows if all(r[j] == v for j, v in keep)])


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *tags]))


def _experiment_rows(res):
    return ROW_COLUMNS, res.rows


def fig1(replicas=None, seed=0, workers=None):
    """Four honest miners at p = 1 for eight rounds, with the block tree as DOT."""
    cfg = SimConfig(n=4, p=1.0, T=8, seed=seed)
    tr = run(cfg)
    world = tr.world
    palette = ("pink", "yellow", "palegreen", "lightblue")
    dot = to_dot(world.store, honest_tips(world), name="fig1", palette=palette)
    cols = ("t", "NB", "common_prefix_len", "max_inconsistency", "n_longest")
    rows = [tuple(int(v) for v in r) for r in np.column_stack([tr[c] for c in cols])]
    return PresetResult("fig1", cols, rows, {"dot": dot})


def warmup_scaling(replicas=None, seed=0, workers=None):
    """Mean inconsistency against n at p = 1 with no adversary."""
    spec = ExperimentSpec(SimConfig(n=4, p=1.0, T=400, seed=seed),
                          {"n": [4, 8, 16, 32]}, replicas or 2000, name="warmup-scaling")
    res = run_experiment(spec, workers)
    return PresetResult("warmup-scaling", *_experiment_rows(res), {"result": res})


def coupling(replicas=None, seed=0, workers=None):
    """Protocol inconsistency at p = 1 next to walk coalescence times, n in {4, 8}."""
    reps = replicas or 100_000
    rows = []
    for n in (4, 8):
        spec = ExperimentSpec(SimConfig(n=n, p=1.0, T=200, seed=seed), {}, reps)
        res = run_experiment(spec, workers)
        rows += [("protocol", n, i, int(v)) for i, v in enumerate(res.column("max_inconsistency"))]
        walk = coalescence_times(n, 1.0, n, reps, _rng(seed, n, 1))
        rows += [("walk", n, i, int(v)) for i, v in enumerate(walk)]
    return PresetResult("coupling", ("source", "n", "replica", "value"), rows)


def _walk_table(name, settings, reps, seed):
    rows = []
    for n_g, u in settings:
        times = coalescence_times(n_g, u, n_g, reps, _rng(seed, n_g, int(round(u * 1000))))
        rows.append((n_g, u, n_g, reps, float(times.mean()), float(times.std(ddof=1))))
    return PresetResult(name, ("n_g", "u", "k", "runs", "mean", "sd"), rows)


def walk_scaling(replicas=None, seed=0, workers=None):
    """Mean coalescence time on the complete graph for n_g in {8, 16, 32}."""
    return _walk_table("walk-scaling", [(8, 1.0), (16, 1.0), (32, 1.0)], replicas or 100_000, seed)


def lazy_scaling(replicas=None, seed=0, workers=None):
    """Mean coalescence time at n_g = 16 for three laziness levels."""
    return _walk_table("lazy-scaling", [(16, 0.25), (16, 0.5), (16, 1.0)], replicas or 100_000, seed)


def walk_exact(replicas=None, seed=0, workers=None):
    """Four walkers on four vertices against the exact absorption time."""
    res = _walk_table("walk-exact", [(4, 1.0)], replicas or 1_000_000, seed)
    res.meta["exact"] = exact_expected_coalescence(4, 4)
    return res


def formulas(replicas=None, seed=0, workers=None):
    """Every bound calculator evaluated on random parameter tuples."""
    rng = _rng(seed, 5)
    rows = []
    for i in range(replicas or 100):
        n = int(rng.integers(2, 200))
        b = int(rng.integers(0, n))
        p = float(10 ** rng.uniform(-4, np.log10(0.9)))
        eps = float(10 ** rng.uniform(-6, -1))
        hb = honest_majority_p_bound(n, b)
        th = inconsistency_theorem_params(n, b, p, eps)
        M = int(rng.integers(1, 100_000))
        tp = theorem_probability(th, M).raw if th.drift > 0 else None
        rows.append((i, n, b, p, eps, M, str(hb), th.p_plus, th.p_minus, th.beta,
                     th.M_star, "" if tp is None else tp))
    header = ("tuple", "n", "b", "p", "epsilon", "M", "honest_majority_p_bound",
              "p_plus", "p_minus", "beta", "M_star", "theorem_raw")
    return PresetResult("formulas", header, rows)


def transition_mc(replicas=None, seed=0, workers=None):
    """Honest-only and corrupt-only frequencies among nonempty protocol rounds.

    The protocol is run with a PrivateChain adversary at (n, b, p) = (20, 5, 0.1)
    in segments until the requested number of nonempty rounds is seen.
    """
    target = replicas or 1_000_000
    seg = 50_000
    plus = minus = mixed = seen = 0
    k = 0
    while seen < target:
        cfg = SimConfig(n=20, b=5, p=0.1, T=seg, adversary=AdversaryTag.PRIVATE_CHAIN,
                        seed=int(np.random.SeedSequence([seed, 8, k]).generate_state(1)[0]))
        tr = run(cfg, record_events=False, keep_world=False)
        nb, ab = tr["NB"], tr["AB"]
        ne = (nb + ab) > 0
        idx = np.flatnonzero(ne)[: target - seen]
        nb, ab = nb[idx], ab[idx]
        plus += int((ab == 0).sum())
        minus += int((nb == 0).sum())
        mixed += int(((nb > 0) & (ab > 0)).sum())
        seen += idx.size
        k += 1
    ref = all_bounds(20, 5, 0.1, 0.01)
    rows = [(20, 5, 0.1, seen, plus / seen, minus / seen, mixed / seen,
             ref["p_plus"], ref["p_minus"])]
    return PresetResult("transition-mc", ("n", "b", "p", "nonempty", "freq_plus", "freq_minus",
                                          "freq_mixed", "p_plus", "p_minus"), rows)


ADVERSARY_TAGS = [t for t in AdversaryTag]


def adversary_invariant(replicas=None, seed=0, workers=None):
    """Adversary lead against N(t) under every tag with the gate and relay on."""
    spec = ExperimentSpec(
        SimConfig(n=32, b=4, p=0.1, T=2000, vdf_mode=True, selective_relay=True, seed=seed),
        {"adversary": ADVERSARY_TAGS, "b": [4, 8, 15], "p": [0.1, 0.5]},
        replicas or 1000, name="adversary-invariant")
    res = run_experiment(spec, workers)
    return PresetResult("adversary-invariant", *_experiment_rows(res), {"result": res})


def opportunity(replicas=None, seed=0, workers=None):
    """J(M) samples at (n, b, p, M) = (20, 4, 0.2, 2000)."""
    n, b, p, M = 20, 4, 0.2, 2000
    reps = replicas or 10_000
    J = K.opportunity_batch(n, b, p, M, reps, _rng(seed, 9))
    th = inconsistency_theorem_params(n, b, p, 0.01)
    ob = opportunity_lower_bound(th, M)
    rows = [(i, int(j), int(j >= ob.threshold)) for i, j in enumerate(J)]
    return PresetResult("opportunity", ("replica", "J", "event"), rows,
                        {"threshold": ob.threshold, "success_probability": ob.success_probability})


def _fuzz_rounds(rng, honest):
    """Embedded VDF rounds and the current round for one random construction."""
    now = int(rng.integers(1, 40))
    if honest:
        # distinct mining rounds in 1..now, each embedding the previous output
        k = int(rng.integers(0, now + 1))
        mined = np.sort(rng.choice(np.arange(1, now + 1), size=k, replace=False))
        return [int(r) - 1 for r in mined], now
    length = int(rng.integers(1, 2 * now + 4))
    mode = int(rng.integers(0, 4))
    if mode == 0:
        rounds = rng.integers(-2, now + 3, size=length)
    elif mode == 1:
        # too long but otherwise well-formed
        rounds = np.sort(rng.choice(np.arange(0, 3 * now + 6), size=length, replace=False))
    elif mode == 2:
        rounds = np.sort(rng.integers(0, now + 1, size=length))
    else:
        rounds = np.arange(length) + int(rng.integers(-1, 2))
    return [int(r) for r in rounds], now


def vdf_fuzz(replicas=None, seed=0, workers=None):
    """Random adversarial and honest chain constructions fed through both gate paths."""
    reps = replicas or 100_000
    rng = _rng(seed, 10)
    store = BlockStore(capacity=reps * 8)
    rows = []
    for i in range(reps):
        honest = bool(rng.random() < 0.2)
        rounds, now = _fuzz_rounds(rng, honest)
        verdict = check_rounds(rounds, now)
        tip = GENESIS
        for r in rounds:
            # the mining round only orders blocks; the gate reads vdf_round
            tip = store.extend(tip, 0, max(r + 1, store[tip].round, 1), honest=honest,
                               vdf_round=r, strict=False)
        cached = gate_accepts(store, tip, now) if rounds else True
        too_long = len(rounds) + 1 > now + 1
        bad_order = any(b <= a for a, b in zip(rounds, rounds[1:]))
        rows.append((i, int(honest), now, len(rounds) + 1, int(bool(verdict)), int(cached),
                     "" if verdict.reason is None else verdict.reason.value,
                     int(too_long), int(bad_order)))
    header = ("trial", "honest", "round", "length", "accepted", "accepted_cached", "reason",
              "too_long", "bad_order")
    return PresetResult("vdf-fuzz", header, rows)


def general_p(replicas=None, seed=0, workers=None):
    """Common-prefix length at n = 100 for three puzzle difficulties."""
    spec = ExperimentSpec(SimConfig(n=100, p=0.001, T=5000, seed=seed),
                          {"p": [0.001, 0.01, 0.1]}, replicas or 1000, name="general-p")
    res = run_experiment(spec, workers)
    return PresetResult("general-p", *_experiment_rows(res), {"result": res})


def chain_quality(replicas=None, seed=0, workers=None):
    """PrivateChain at n = 16, b = 8, p = 0.9, with and without gate plus relay, paired seeds."""
    base = SimConfig(n=16, b=8, p=0.9, T=500, adversary=AdversaryTag.PRIVATE_CHAIN, seed=seed)
    spec = ExperimentSpec(base, {"vdf_mode": [False, True]}, replicas or 1000,
                          name="chain-quality", paired=True,
                          link={"selective_relay": "vdf_mode"})
    res = run_experiment(spec, workers)
    return PresetResult("chain-quality", *_experiment_rows(res), {"result": res})


PRESETS = {
    "fig1": fig1,
    "coupling": coupling,
    "warmup-scaling": warmup_scaling,
    "walk-scaling": walk_scaling,
    "lazy-scaling": lazy_scaling,
    "formulas": formulas,
    "transition-mc": transition_mc,
    "walk-exact": walk_exact,
    "adversary-invariant": adversary_invariant,
    "opportunity": opportunity,
    "vdf-fuzz": vdf_fuzz,
    "general-p": general_p,
    "chain-quality": chain_quality,
}

# reduced replica counts used when checking that reruns are byte-identical
QUICK = {
    "fig1": None, "coupling": 200, "warmup-scaling": 20, "walk-scaling": 2000,
    "lazy-scaling": 2000, "formulas": 100, "transition-mc": 20_000, "walk-exact": 5000,
    "adversary-invariant": 2, "opportunity": 500, "vdf-fuzz": 2000, "general-p": 3,
    "chain-quality": 20,
}


def run_preset(name, replicas=None, seed=0, workers=None):
    try:
        fn = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return fn(replicas, seed, workers)
