import json
import math
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from nakasim.bounds import (AdvantageProcess, ContractError, OpportunityWalk, all_bounds, beta,
                            bound_params, expected_growth_general_p, expected_prefix_p1,
                            growth_term, honest_majority_p_bound, inconsistency_theorem_params,
                            opportunity_lower_bound, theorem_probability, transition_probs,
                            update_advantage, update_opportunity, window_opportunity)
from nakasim.chain import common_prefix
from nakasim.engine import SimConfig, honest_tips, run


def test_honest_majority_examples():
    for b in range(1, 20):
        n = 2 * b + 1
        assert honest_majority_p_bound(n, b) == Fraction(2, (n + 1) ** 2)
    assert honest_majority_p_bound(10, 0) == Fraction(1, 20)
    assert honest_majority_p_bound(10, 5) == 0
    assert honest_majority_p_bound(10, 7) < 0
    with pytest.raises(ValueError):
        honest_majority_p_bound(5, 5)


def test_transition_edge_cases():
    tp = transition_probs(12, 0, 0.3)
    assert (tp.p_plus, tp.p_minus, tp.p_star) == (1.0, 0.0, 1.0)
    for p in (0.0, 1.0):
        with pytest.raises(ValueError):
            transition_probs(12, 3, p)
    with pytest.raises(ValueError):
        transition_probs(5, 5, 0.1)


def test_transition_symmetry():
    for n, b, p in [(20, 5, 0.1), (7, 3, 0.4), (100, 1, 1e-4)]:
        assert math.isclose(transition_probs(n, b, p).p_plus, transition_probs(n, n - b, p).p_minus,
                            rel_tol=1e-12)


def test_transition_against_binomial_enumeration():
    # P(only honest mine | someone mines), summed over every outcome of the n coins
    n, b, p = 6, 2, Fraction(3, 10)
    plus = minus = nonempty = Fraction(0)
    for k in range(n + 1):
        for winners in combinations(range(n), k):
            pr = p ** k * (1 - p) ** (n - k)
            if k == 0:
                continue
            nonempty += pr
            honest = sum(1 for w in winners if w < n - b)
            if honest == k:
                plus += pr
            elif honest == 0:
                minus += pr
    tp = transition_probs(n, b, float(p))
    assert math.isclose(tp.p_plus, plus / nonempty, rel_tol=1e-12)
    assert math.isclose(tp.p_minus, minus / nonempty, rel_tol=1e-12)
    assert tp.p_star <= 1


def test_advantage_cases():
    assert update_advantage(AdvantageProcess(0), 3, 0).value == 0
    assert update_advantage(AdvantageProcess(2), 0, 1).value == 3
    assert update_advantage(AdvantageProcess(2), 1, 1).value == 2
    assert update_advantage(AdvantageProcess(2), 0, 0).value == 2
    proc = AdvantageProcess()
    for nb, ab in [(0, 1), (0, 2), (1, 0), (2, 0), (3, 0)]:
        update_advantage(proc, nb, ab)
    assert proc.history == [1, 2, 1, 0, 0]


def test_opportunity_cases():
    w = OpportunityWalk()
    for nb, ab in [(1, 0), (0, 1), (0, 2), (2, 2)]:
        update_opportunity(w, nb, ab)
    assert w.history == [1, 0, -1, -1]
    assert w.m == 4
    with pytest.raises(ContractError):
        update_opportunity(w, 0, 0)


def test_trackers_match_engine():
    tr = run(SimConfig(n=12, b=4, p=0.2, T=500, adversary="PrivateChain", seed=1),
             record_events=False)
    proc, walk = AdvantageProcess(), OpportunityWalk()
    for nb, ab in zip(tr["NB"], tr["AB"]):
        update_advantage(proc, int(nb), int(ab))
        if nb + ab:
            update_opportunity(walk, int(nb), int(ab))
    assert proc.history == list(tr["N"])
    assert walk.value == tr["J"][-1]
    assert window_opportunity(tr["NB"], tr["AB"], 10 ** 9) == walk.value


def test_opportunity_bound_b0():
    bp = bound_params(10, 0, 0.2)
    for M in (16, 100, 1000):
        ob = opportunity_lower_bound(bp, M)
        assert ob.threshold == M / 4
        assert math.isclose(ob.success_probability,
                            max(0.0, 1 - math.exp(-M / 16) - math.exp(-M / 2)), rel_tol=1e-12)


def test_opportunity_bound_vacuous():
    assert opportunity_lower_bound(bound_params(10, 7, 0.1), 1000).vacuous


def test_beta_spot_value():
    assert math.isclose(beta(10, 5, 0.1), 0.5 / 18, rel_tol=1e-12)


def test_m_star_branches_b0():
    eps = 0.05
    th = inconsistency_theorem_params(50, 0, 0.02, eps)
    bt = beta(50, 0, 0.02)
    branches = [4 * math.log(1 / eps), 4 / bt, 16 * math.log(4 / eps)]
    assert th.M_star == math.ceil(max(branches))


def test_m_star_vacuous_and_side_condition():
    th = inconsistency_theorem_params(10, 6, 0.1, 0.1)
    assert th.M_star == math.inf and th.vacuous
    assert not inconsistency_theorem_params(4, 1, 0.2, 0.01).side_condition_ok
    with pytest.raises(ValueError):
        inconsistency_theorem_params(10, 1, 0.1, 1.5)


def test_theorem_probability_clamped():
    bp = inconsistency_theorem_params(64, 8, 0.05, 0.1)
    small = theorem_probability(bp, 1)
    assert small.raw < 0 and small.value == 0.0 and small.vacuous
    big = theorem_probability(bp, 10 ** 6)
    assert 0 < big.value <= 1 and not big.vacuous


def test_m_star_end_to_end():
    th = inconsistency_theorem_params(64, 8, 0.05, 0.1)
    ok = 0
    for seed in range(1000):
        tr = run(SimConfig(n=64, b=8, p=0.05, T=300, adversary="PrivateChain", vdf_mode=True,
                           selective_relay=True, seed=seed), record_events=False)
        ok += tr.summary["max_inconsistency"] < th.M_star
    assert ok >= 900


def test_prefix_p1_interval():
    assert expected_prefix_p1(1, 40) == (41.0, 41.0)
    lo, hi = expected_prefix_p1(4, 8)
    assert lo <= 5 <= hi


def test_prefix_p1_monte_carlo():
    lo, hi = expected_prefix_p1(16, 1000)
    cps = [run(SimConfig(n=16, p=1.0, T=1000, seed=s), record_events=False)["common_prefix_len"][-1]
           for s in range(10_000)]
    assert lo <= np.mean(cps) <= hi


def test_growth_regimes():
    assert expected_growth_general_p(100, 0.001, 10).regime == "sparse"
    assert expected_growth_general_p(100, 0.1, 10).regime == "dense"
    assert math.isclose(expected_growth_general_p(100, 0.001, 10).slack_term,
                        1 / (0.1 * math.exp(-0.1)), rel_tol=1e-12)
    g = growth_term(2000, 0.01, 10 ** 6)
    assert abs((g - 1) / 10 ** 6 - 1) < 1e-8
    assert growth_term(50, 1e-12, 1) > 1


def test_dense_inconsistency_below_slack():
    slack = expected_growth_general_p(100, 0.1, 200).slack_term
    inc = [run(SimConfig(n=100, p=0.1, T=200, seed=s), record_events=False)["max_inconsistency"][-1]
           for s in range(10_000)]
    assert np.mean(inc) <= slack


def test_honest_blocks_at_least_window_j():
    for tag in ("PrivateChain", "SelectiveRelease", "LexGrind", "FirstSeenSplit"):
        for seed in range(15):
            tr = run(SimConfig(n=20, b=6, p=0.2, T=300, adversary=tag, vdf_mode=True,
                               selective_relay=True, seed=seed), record_events=False)
            world = tr.world
            tips = honest_tips(world)
            top = max(c.length for c in tips)
            for m in (5, 20, 60):
                J = window_opportunity(tr["NB"], tr["AB"], m)
                if J < 0:
                    continue
                for c in tips:
                    if c.length == top:
                        recent = world.store.ancestors(c.tip)[:m]
                        assert sum(world.store[b].honest for b in recent if b) >= J


def test_all_bounds_is_pure_and_serialisable():
    a = all_bounds(20, 4, 0.2, 0.01)
    assert a == all_bounds(20, 4, 0.2, 0.01)
    json.dumps(a)
    assert a["honest_majority_p_bound"] == str(Fraction(12, 512))
    assert all_bounds(4, 0, 1.0, 0.1)["M_star"] is None


def test_summary_consistent_with_prefix():
    tr = run(SimConfig(n=10, b=3, p=0.3, T=100, adversary="PrivateChain", seed=0))
    rep = common_prefix(tr.world.store, honest_tips(tr.world))
    assert rep.chain_quality == tr.summary["chain_quality"]
