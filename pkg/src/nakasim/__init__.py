"""Seeded simulator for longest-chain consensus in synchronous rounds."""

from .adversary import AdversaryTag
from .bounds import (expected_growth_general_p, expected_prefix_p1, honest_majority_p_bound,
                     inconsistency_theorem_params, lazy_walk_params, opportunity_lower_bound, theorem_probability,
                     transition_probs)
from .chain import BlockStore, Chain, common_prefix, longest_tips, to_dot
from .engine import ProcessTrace, SimConfig, check_invariants, new_world, run, step
from .experiment import ExperimentSpec, ks_compare, run_experiment
from .strategies import Strategy, choose
from .vdf import check_rounds, validate_chain
from .walks import coalescence_time, coalescence_times, exact_expected_coalescence

__version__ = "0.1.0"

__all__ = [
    "AdversaryTag", "BlockStore", "Chain", "ExperimentSpec", "ProcessTrace", "SimConfig",
    "Strategy", "check_invariants", "check_rounds", "choose", "coalescence_time",
    "coalescence_times", "common_prefix", "exact_expected_coalescence",
    "expected_growth_general_p", "expected_prefix_p1", "honest_majority_p_bound",
    "inconsistency_theorem_params", "ks_compare", "lazy_walk_params", "longest_tips", "new_world",
    "opportunity_lower_bound", "run", "run_experiment", "step", "theorem_probability",
    "to_dot", "transition_probs", "validate_chain",
]
