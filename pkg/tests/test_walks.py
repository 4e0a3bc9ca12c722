from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nakasim.engine import SimConfig, honest_tips, run
from nakasim.walks import (WalkSystem, coalescence_matches_prefix, coalescence_time,
                           coalescence_times, exact_expected_coalescence, extract_backwards_walks,
                           occupancy_expected_coalescence, partition_chain, step_walks, walk_csv)
from conftest import FIG1_TIPS

BLUE, PINK, YELLOW, GREEN = 3, 0, 1, 2


def test_two_walkers_geometric():
    t = coalescence_times(2, 1.0, 2, 1_000_000, np.random.default_rng(0))
    assert abs(t.mean() - 2.0) < 0.02


def test_single_walker():
    assert coalescence_time(5, 1.0, 1, np.random.default_rng(0)) == 0


def test_too_many_walkers():
    with pytest.raises(ValueError):
        coalescence_times(3, 1.0, 4, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        coalescence_times(3, 0.0, 2, 10, np.random.default_rng(0))
    # random starts may share vertices
    assert coalescence_times(3, 1.0, 6, 10, np.random.default_rng(0), distinct=False).min() >= 0


def test_partition_state_count():
    states, trans = partition_chain(4, 4)
    assert len(states) == 15
    for law in trans.values():
        assert sum(law.values()) == 1


def test_exact_small_values():
    assert exact_expected_coalescence(2, 2) == 2
    assert exact_expected_coalescence(3, 3) == Fraction(27, 7)
    assert exact_expected_coalescence(4, 4) == Fraction(838, 145)
    assert exact_expected_coalescence(1, 4) == 0


@pytest.mark.parametrize("k,n_g", [(2, 5), (3, 4), (4, 6), (5, 5)])
def test_two_oracles_agree(k, n_g):
    assert exact_expected_coalescence(k, n_g) == occupancy_expected_coalescence(k, n_g)


def test_exact_lazy_scaling():
    base = exact_expected_coalescence(4, 4)
    for u in (Fraction(1, 2), Fraction(1, 4)):
        assert exact_expected_coalescence(4, 4, u) == base / u


def test_lazy_ratio():
    rng = np.random.default_rng(3)
    half = coalescence_times(16, 0.5, 16, 100_000, rng).mean()
    full = coalescence_times(16, 1.0, 16, 100_000, rng).mean()
    assert 1.7 <= half / full <= 2.3


def test_fewer_bins_coalesce_faster():
    rng = np.random.default_rng(4)
    runs = 100_000
    a = np.sort(coalescence_times(8, 1.0, 8, runs, rng))
    b = np.sort(coalescence_times(16, 1.0, 8, runs, rng))
    grid = np.arange(0, max(a[-1], b[-1]) + 1)
    cdf_a = np.searchsorted(a, grid, side="right") / runs
    cdf_b = np.searchsorted(b, grid, side="right") / runs
    # two-sided DKW band at level 1e-3 for each sample
    eps = 2 * np.sqrt(np.log(2 / 1e-3) / (2 * runs))
    assert np.all(cdf_a >= cdf_b - eps)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.floats(0.1, 1.0), st.integers(0, 2**32 - 1))
def test_merging_is_permanent(n_g, u, seed):
    rng = np.random.default_rng(seed)
    k = min(n_g, 6)
    sys = WalkSystem.start(n_g, u, k, rng)
    prev = sys.clusters
    merged = set()
    while sys.clusters > 1 and sys.steps < 500:
        step_walks(sys, rng)
        assert sys.clusters <= prev
        prev = sys.clusters
        for i in range(k):
            if not sys.alive[i]:
                merged.add(i)
                assert sys.positions[i] == sys.positions[sys.rep[i]]
        assert all(not sys.alive[i] for i in merged)
    if sys.clusters == 1:
        step_walks(sys, rng)
        assert sys.clusters == 1


def test_fig1_backwards_chain(fig1_store):
    bw = extract_backwards_walks(fig1_store, FIG1_TIPS)
    # tips are reported in id order, so the blue tip 32 comes last
    assert bw.miners[3] == [BLUE, PINK, BLUE, YELLOW, GREEN, YELLOW, YELLOW, BLUE, "genesis"]
    assert bw.rounds[3] == list(range(8, -1, -1))
    assert bw.coalescence_step == 4


def test_single_tip_walk(fig1_store):
    assert extract_backwards_walks(fig1_store, [32]).coalescence_step == 0


def test_protocol_walks_match_prefix():
    for seed in range(500):
        tr = run(SimConfig(n=4, p=1.0, T=30, seed=seed))
        assert coalescence_matches_prefix(tr.world.store, honest_tips(tr.world))


def test_walk_csv():
    text = walk_csv([(4, 1.0, 4, 0, 3)])
    assert text.splitlines()[:2] == ["# schema=nakasim-walks/1", "n_g,u,k,seed,coalescence_time"]


@pytest.mark.parametrize("n,p", [(100, 0.1), (30, 0.1), (40, 0.5)])
def test_general_p_dominated_by_lazy_walk(n, p):
    from nakasim.bounds import lazy_walk_params
    n_g, u = lazy_walk_params(n, p)
    runs = 2000
    inc = np.sort([run(SimConfig(n=n, p=p, T=200, seed=s), record_events=False)["max_inconsistency"][-1]
                   for s in range(runs)])
    walk = np.sort(coalescence_times(n_g, u, n_g, 20_000, np.random.default_rng(n)))
    assert inc.mean() <= walk.mean()
    grid = np.arange(0, max(inc[-1], walk[-1]) + 1)
    cdf_inc = np.searchsorted(inc, grid, side="right") / runs
    cdf_walk = np.searchsorted(walk, grid, side="right") / len(walk)
    eps = np.sqrt(np.log(2 / 1e-3) / (2 * runs)) + np.sqrt(np.log(2 / 1e-3) / (2 * len(walk)))
    assert np.all(cdf_inc >= cdf_walk - eps)


def test_lazy_walk_params():
    from nakasim.bounds import lazy_walk_params
    assert lazy_walk_params(10, 1.0) == (20, 1.0)
    n_g, u = lazy_walk_params(30, 0.1)
    assert n_g == 6 and 0.88 < u < 0.89
