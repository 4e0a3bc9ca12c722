"""Seeded sweeps over SimConfig, key-value config files and named presets."""

import csv
import dataclasses
import io
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .adversary import AdversaryTag
from .engine import SimConfig, check_invariants, run
from .strategies import Strategy

RESULT_SCHEMA = "nakasim-experiment/1"
WORKERS_ENV = "NAKASIM_WORKERS"


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = problems
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in problems))


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_EXPERIMENT_KEYS = {"replicas", "output", "calibration", "name"}


def _coerce(key, text):
    if key in ("strategy",):
        return Strategy(text)
    if key in ("adversary",):
        return AdversaryTag(text)
    kind = _FIELDS[key].type
    if kind in (bool, "bool"):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind in (int, "int"):
        return int(text)
    if kind in (float, "float"):
        return float(text)
    return text


def parse_config(text):
    """Parse `key = value` lines into (sim fields, sweeps, experiment settings).

    Sweep axes are written `sweep.<field> = v1, v2, ...`. All bad lines are
    reported together.
    """
    sim, sweep, extra, problems = {}, {}, {}, []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append((ln, f"expected key = value, got {raw.strip()!r}"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("sweep."):
                name = key[len("sweep."):]
                if name not in _FIELDS or name == "seed":
                    raise KeyError(name)
                sweep[name] = [_coerce(name, v.strip()) for v in value.split(",") if v.strip()]
            elif key in _FIELDS:
                sim[key] = _coerce(key, value)
            elif key in _EXPERIMENT_KEYS:
                extra[key] = int(value) if key == "replicas" else value
            else:
                raise KeyError(key)
        except KeyError:
            problems.append((ln, f"unknown key {key!r}"))
        except ValueError as exc:
            problems.append((ln, f"bad value for {key!r}: {exc}"))
    if problems:
        raise ConfigError(problems)
    return sim, sweep, extra


def load_sim_config(path):
    sim, sweep, _ = parse_config(Path(path).read_text())
    if sweep:
        raise ConfigError([(0, "sweep keys are only valid in experiment files")])
    try:
        return SimConfig(**sim)
    except (TypeError, ValueError) as exc:
        raise ConfigError([(0, str(exc))]) from None


def dump_config(cfg):
    return "".join(f"{k} = {v}\n" for k, v in cfg.as_dict().items())


@dataclass
class ExperimentSpec:
    base: SimConfig
    sweep: dict = field(default_factory=dict)
    replicas: int = 1
    output_dir: str | None = None
    calibration: str | None = None
    name: str = "experiment"
    # same replica seeds in every cell, for paired comparisons
    paired: bool = False
    # fields copied from another field of the same cell, e.g. {"selective_relay": "vdf_mode"}
    link: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        for k in list(self.sweep) + list(self.link):
            if k not in _FIELDS or k == "seed":
                raise ValueError(f"cannot sweep {k!r}")

    @classmethod
    def from_file(cls, path):
        sim, sweep, extra = parse_config(Path(path).read_text())
        sim.setdefault("n", 4)
        try:
            base = SimConfig(**sim)
        except (TypeError, ValueError) as exc:
            raise ConfigError([(0, str(exc))]) from None
        return cls(base, sweep, extra.get("replicas", 1), extra.get("output"),
                   extra.get("calibration"), extra.get("name", Path(path).stem))

    def cells(self):
        keys = list(self.sweep)
        out = []
        for combo in itertools.product(*(self.sweep[k] for k in keys)):
            cfg = self.base.replace(**dict(zip(keys, combo)))
            if self.link:
                cfg = cfg.replace(**{dst: getattr(cfg, src) for dst, src in self.link.items()})
            out.append(cfg)
        return out


def replica_seed(base_seed, cell, replica):
    """64-bit seed for one replica of one cell, mixed from the master seed."""
    ss = np.random.SeedSequence([int(base_seed), int(cell), int(replica)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


ROW_COLUMNS = (
    "cell", "replica", "seed", "n", "b", "p", "T", "strategy", "adversary",
    "selective_relay", "vdf_mode", "common_prefix_len", "max_inconsistency",
    "peak_inconsistency", "mean_inconsistency", "growth_rate", "chain_quality",
    "honest_max_len", "adv_max_len", "N", "J", "assumption_rounds", "fallback_rounds",
    "invariant_violations",
)


def _one(job):
    cell, replica, cfg = job
    tr = run(cfg, record_events=False, keep_world=False)
    s = tr.summary
    viol = sum(len(v) for v in check_invariants(tr).values())
    return (cell, replica, cfg.seed, cfg.n, cfg.b, cfg.p, cfg.T, cfg.strategy.value,
            cfg.adversary.value, int(cfg.selective_relay), int(cfg.vdf_mode),
            s["common_prefix_len"], s["max_inconsistency"], s["peak_inconsistency"],
            s["mean_inconsistency"], s["growth_rate"], s["chain_quality"],
            s["honest_max_len"], s["adv_max_len"], s["N"], s["J"],
            s["assumption_rounds"], s["fallback_rounds"], viol)


def worker_count():
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


AGGREGATE_COLUMNS = (
    "cell", "n", "b", "p", "T", "strategy", "adversary", "selective_relay", "vdf_mode",
    "replicas", "mean_inconsistency", "sd_inconsistency", "q50", "q90", "q99", "mean_prefix",
    "mean_growth_rate", "mean_chain_quality", "violations",
)


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list

    def column(self, name, cell=None):
        i = ROW_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows if cell is None or r[0] == cell])

    def aggregates(self):
        out = []
        for c, cfg in enumerate(self.spec.cells()):
            inc = self.column("max_inconsistency", c)
            if len(inc) == 0:
                continue
            out.append({
                "cell": c, "n": cfg.n, "b": cfg.b, "p": cfg.p, "T": cfg.T,
                "strategy": cfg.strategy.value, "adversary": cfg.adversary.value,
                "selective_relay": int(cfg.selective_relay), "vdf_mode": int(cfg.vdf_mode),
                "replicas": len(inc),
                "mean_inconsistency": float(inc.mean()),
                "sd_inconsistency": float(inc.std(ddof=1)) if len(inc) > 1 else 0.0,
                "q50": float(np.quantile(inc, 0.5)),
                "q90": float(np.quantile(inc, 0.9)),
                "q99": float(np.quantile(inc, 0.99)),
                "mean_prefix": float(self.column("common_prefix_len", c).mean()),
                "mean_growth_rate": float(self.column("growth_rate", c).mean()),
                "mean_chain_quality": float(self.column("chain_quality", c).mean()),
                "violations": int(self.column("invariant_violations", c).sum()),
            })
        return out

    def rows_csv(self):
        return rows_to_csv(ROW_COLUMNS, self.rows)

    def aggregates_csv(self):
        return rows_to_csv(AGGREGATE_COLUMNS, [list(a.values()) for a in self.aggregates()])

    def audit(self):
        """Recompute every aggregate from the raw rows of a CSV round trip."""
        raw = list(csv.reader(self.rows_csv().splitlines()[1:]))
        header, body = raw[0], raw[1:]
        col = {h: i for i, h in enumerate(header)}
        for agg in self.aggregates():
            inc = np.array([float(r[col["max_inconsistency"]]) for r in body
                            if int(r[col["cell"]]) == agg["cell"]])
            if len(inc) != agg["replicas"] or not np.isclose(inc.mean(), agg["mean_inconsistency"]):
                return False
            if not np.isclose(np.quantile(inc, 0.9), agg["q90"]):
                return False
        return True


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def rows_to_csv(header, rows, schema=RESULT_SCHEMA):
    buf = io.StringIO()
    buf.write(f"# schema={schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_experiment(spec, workers=None):
    """Run every (cell, replica) pair; output order does not depend on workers."""
    jobs = []
    for c, cfg in enumerate(spec.cells()):
        for r in range(spec.replicas):
            seed = replica_seed(spec.base.seed, 0 if spec.paired else c, r)
            jobs.append((c, r, cfg.replace(seed=seed)))
    if spec.output_dir:
        out = Path(spec.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"output directory {out} is not writable: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise OSError(f"output directory {out} is not writable")
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_one, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        rows = [_one(j) for j in jobs]
    rows.sort(key=lambda r: (r[0], r[1]))
    result = ExperimentResult(spec, rows)
    if spec.output_dir:
        (out / "replicas.csv").write_text(result.rows_csv())
        (out / "cells.csv").write_text(result.aggregates_csv())
        (out / "spec.json").write_text(json.dumps({
            "schema": RESULT_SCHEMA, "name": spec.name, "base": spec.base.as_dict(),
            "sweep": {k: [getattr(v, "value", v) for v in vs] for k, vs in spec.sweep.items()},
            "replicas": spec.replicas, "paired": spec.paired, "link": spec.link}, indent=1))
    return result


def ks_compare(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    if len(sample_a) == 0 or len(sample_b) == 0:
        raise ValueError("both samples must be non-empty")
    return float(stats.ks_2samp(np.asarray(sample_a), np.asarray(sample_b)).statistic)
