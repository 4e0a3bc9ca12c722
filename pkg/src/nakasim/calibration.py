"""Calibration constants measured from the walk oracle and the protocol.

The shipped file is produced by `nakasim calibrate` and read by the bound
calculators; nothing here is a constant taken from the analysis.
"""

import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA = "nakasim-calibration/1"
SIZES = (4, 8, 16, 32)
LAZY = (0.25, 0.5, 1.0)


@dataclass(frozen=True)
class Calibration:
    walk_envelope: float
    p1_slope: float
    lazy_envelope: float
    exact_4walker: str
    walk_means: dict = field(default_factory=dict)
    p1_means: dict = field(default_factory=dict)
    runs: int = 0
    seed: int = 0
    schema: str = SCHEMA

    @property
    def exact_4walker_value(self):
        return Fraction(self.exact_4walker)


def fit_through_origin(x, y):
    """Least-squares slope of y = c x and the relative deviation of each point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = float(x @ y / (x @ x))
    return c, (y - c * x) / (c * x)


def protocol_p1_means(sizes, runs, seed, T=None):
    """Mean final max_inconsistency at p = 1, b = 0 for each n."""
    from .engine import SimConfig, run
    out = {}
    for n in sizes:
        horizon = T if T is not None else max(200, 20 * n)
        ss = np.random.SeedSequence([seed, n])
        seeds = ss.generate_state(runs, dtype=np.uint64)
        vals = [run(SimConfig(n=n, p=1.0, T=horizon, seed=int(s)), record_events=False,
                    keep_world=False).records[-1, 4] for s in seeds]
        out[n] = float(np.mean(vals))
    return out


def walk_means(sizes, runs, seed, u=1.0):
    from .walks import coalescence_times
    out = {}
    for n in sizes:
        rng = np.random.default_rng([seed, n, int(u * 1000)])
        out[n] = float(coalescence_times(n, u, n, runs, rng).mean())
    return out


def compute_calibration(runs=20000, seed=2024, protocol_runs=None):
    from .walks import exact_expected_coalescence
    wm = walk_means(SIZES, runs, seed)
    envelope = max(wm[n] / n for n in SIZES)
    lazy = {}
    for u in LAZY:
        lazy[u] = walk_means((16,), runs, seed, u)[16]
    lazy_env = max(lazy[u] * u / 16 for u in LAZY)
    pm = protocol_p1_means(SIZES, protocol_runs or max(runs // 10, 100), seed)
    slope, _ = fit_through_origin(list(pm), list(pm.values()))
    return Calibration(
        walk_envelope=envelope,
        p1_slope=slope,
        lazy_envelope=lazy_env,
        exact_4walker=str(exact_expected_coalescence(4, 4)),
        walk_means={str(k): v for k, v in wm.items()},
        p1_means={str(k): v for k, v in pm.items()},
        runs=runs,
        seed=seed,
    )


def save_calibration(cal, path):
    Path(path).write_text(json.dumps(asdict(cal), indent=1, sort_keys=True) + "\n")


def read_calibration(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported calibration schema {doc.get('schema')!r}")
    return Calibration(**doc)


@lru_cache(maxsize=None)
def load_calibration(path=None):
    """The shipped calibration, or the file at path."""
    if path is not None:
        return read_calibration(path)
    ref = resources.files("nakasim") / "data" / "calibration.json"
    with resources.as_file(ref) as p:
        return read_calibration(p)
