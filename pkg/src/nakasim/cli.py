"""Command-line entry point: run, bounds, calibrate, export-dot."""

import argparse
import json
import sys
from pathlib import Path

from .adversary import AdversaryTag
from .bounds import all_bounds
from .engine import SimConfig, honest_tips, run
from .experiment import ConfigError, ExperimentSpec, parse_config, run_experiment
from .strategies import Strategy

SIM_FLAGS = ("n", "b", "p", "T", "strategy", "adversary", "seed")


def _add_sim_flags(ap):
    ap.add_argument("--config", help="key = value file; flags override it")
    ap.add_argument("--n", type=int)
    ap.add_argument("--b", type=int)
    ap.add_argument("--p", type=float)
    ap.add_argument("--T", type=int)
    ap.add_argument("--strategy", choices=[s.value for s in Strategy])
    ap.add_argument("--adversary", choices=[a.value for a in AdversaryTag])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--selective-relay", action="store_true", default=None)
    ap.add_argument("--vdf-mode", action="store_true", default=None)
    ap.add_argument("--release-on-tie", action="store_true", default=None)


def _sim_fields(args):
    fields, sweep, extra = {}, {}, {}
    if args.config:
        fields, sweep, extra = parse_config(Path(args.config).read_text())
    for k in SIM_FLAGS + ("selective_relay", "vdf_mode", "release_on_tie"):
        v = getattr(args, k)
        if v is not None:
            fields[k] = v
    fields.setdefault("n", 4)
    return fields, sweep, extra


def _parse_sweep(items):
    from .experiment import _coerce
    out = {}
    for item in items or ():
        key, _, values = item.partition("=")
        out[key] = [_coerce(key, v) for v in values.split(",") if v]
    return out


def cmd_run(args):
    if args.list_presets:
        from .presets import PRESETS
        for name, fn in PRESETS.items():
            print(f"{name}: {fn.__doc__.splitlines()[0]}")
        return 0
    if args.preset:
        from .presets import run_preset
        res = run_preset(args.preset, args.replicas, args.seed or 0)
        text = res.csv
        if args.output:
            out = Path(args.output)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{args.preset}.csv").write_text(text)
            if "dot" in res.meta:
                (out / f"{args.preset}.dot").write_text(res.meta["dot"])
        else:
            sys.stdout.write(text)
        return 0
    fields, sweep, extra = _sim_fields(args)
    sweep.update(_parse_sweep(args.sweep))
    base = SimConfig(**fields)
    if args.trace:
        tr = run(base)
        writer = tr.to_json if args.trace.endswith(".json") else tr.to_csv
        writer(args.trace)
    spec = ExperimentSpec(base, sweep, args.replicas or extra.get("replicas", 1),
                          args.output or extra.get("output"), extra.get("calibration"),
                          extra.get("name", "cli"))
    res = run_experiment(spec, args.workers)
    if res.rows:
        sys.stdout.write(res.aggregates_csv())
    else:
        sys.stdout.write("# no cells\n")
    if args.audit and not res.audit():
        print("aggregate audit failed", file=sys.stderr)
        return 1
    return 0


def cmd_bounds(args):
    doc = all_bounds(args.n, args.b, args.p, args.epsilon, args.M)
    print(json.dumps(doc, indent=1, default=str))
    return 0


def cmd_calibrate(args):
    from .calibration import compute_calibration, save_calibration
    cal = compute_calibration(args.runs, args.seed, args.protocol_runs)
    save_calibration(cal, args.output)
    print(f"walk_envelope={cal.walk_envelope:.6f} p1_slope={cal.p1_slope:.6f} -> {args.output}")
    return 0


def cmd_export_dot(args):
    from .chain import to_dot
    fields, _, _ = _sim_fields(args)
    tr = run(SimConfig(**fields))
    dot = to_dot(tr.world.store, honest_tips(tr.world))
    if args.output:
        Path(args.output).write_text(dot)
    else:
        sys.stdout.write(dot)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="nakasim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a simulation sweep or a named preset")
    _add_sim_flags(r)
    r.add_argument("--replicas", type=int)
    r.add_argument("--sweep", action="append", metavar="FIELD=V1,V2",
                   help="sweep axis; may be repeated")
    r.add_argument("--output", help="directory for replicas.csv, cells.csv and spec.json")
    r.add_argument("--trace", help="also write one trace of the base config (.csv or .json)")
    r.add_argument("--workers", type=int, help="overrides NAKASIM_WORKERS")
    r.add_argument("--preset")
    r.add_argument("--list-presets", action="store_true")
    r.add_argument("--audit", action="store_true", help="recheck aggregates against raw rows")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="evaluate every bound calculator")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--b", type=int, default=0)
    b.add_argument("--p", type=float, required=True)
    b.add_argument("--epsilon", type=float, default=0.01)
    b.add_argument("--M", type=int)
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("calibrate", help="measure walk and protocol constants")
    c.add_argument("--runs", type=int, default=100_000)
    c.add_argument("--protocol-runs", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=2024)
    c.add_argument("--output", default="calibration.json")
    c.set_defaults(func=cmd_calibrate)

    d = sub.add_parser("export-dot", help="run one simulation and write its block tree")
    _add_sim_flags(d)
    d.add_argument("--output")
    d.set_defaults(func=cmd_export_dot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for ln, msg in exc.problems:
            print(f"config line {ln}: {msg}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
