"""Command line: ``bird run``, ``bird oracle-check`` and ``bird ospa``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import __version__
from .io import load_scenario, scenario_hash
from .metrics import ospa
from .oracle import MAX_CARD, MAX_CELLS, run_suite
from .sim import BUILTIN, MODES, ConfigError, check_combination, monte_carlo, with_overrides

CSV_COLUMNS = ("mode", "form", "node", "step", "ospa_total", "ospa_loc", "ospa_card",
               "card_est_mean", "card_true")


def _fmt(x, style):
    x = float(x)
    return x.hex() if style == "hex" else repr(x)


def _git_describe():
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _scenario(name):
    if name in BUILTIN:
        return BUILTIN[name]()
    if not os.path.exists(name):
        raise FileNotFoundError(name)
    return load_scenario(name)


def write_csv(path, aggregates, style="repr"):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for agg in aggregates:
        for i, node in enumerate(agg.nodes):
            for k in range(agg.ospa.shape[1]):
                o = agg.ospa[i, k]
                w.writerow([agg.mode, agg.form, node, k, _fmt(o[0], style), _fmt(o[1], style),
                            _fmt(o[2], style), _fmt(agg.card[i, k], style),
                            int(agg.card_true[k])])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def _tracks(aggregates, limit):
    out = []
    for agg in aggregates:
        for t, trial in enumerate(agg.trials[:limit]):
            out.append({
                "mode": agg.mode, "form": agg.form, "trial": t,
                "truth": [np.asarray(x).tolist() for x in trial.truth],
                "estimates": {str(n): [np.asarray(e).tolist() for e in trial.estimates[n]]
                              for n in agg.nodes},
            })
    return out


def summary_table(aggregates, start):
    nodes = aggregates[0].nodes
    lines = ["mode  " + "".join(f"{'node ' + str(n):>10}" for n in nodes) + f"{'mean':>10}"]
    for agg in aggregates:
        s = agg.steady_ospa(start)
        lines.append(f"{agg.mode:<6}" + "".join(f"{v:10.2f}" for v in s) + f"{s.mean():10.2f}")
    return "\n".join(lines)


def cmd_run(args):
    try:
        cfg = _scenario(args.scenario)
    except FileNotFoundError as e:
        print(f"error: scenario file not found: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"error: bad scenario {args.scenario}: {e}", file=sys.stderr)
        return 2
    kw = {}
    if args.consensus_steps is not None:
        kw["consensus_steps"] = args.consensus_steps
    if args.duration is not None:
        kw["duration"] = args.duration
    try:
        if kw:
            cfg = with_overrides(cfg, **kw)
        if cfg.consensus_steps < 0:
            raise ConfigError("consensus_steps: must be nonnegative")
        for mode in args.mode:
            check_combination(mode, args.form, args.fusion)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    aggs = []
    for mode in args.mode:
        fusion = None if mode == "m1" else args.fusion
        aggs.append(monte_carlo(cfg, mode, args.form, args.runs, args.seed, fusion,
                                keep_trials=args.dump_trials > 0))
    elapsed = time.perf_counter() - t0
    start = min(cfg.steady_start, cfg.duration - 1)   # short runs: last step only
    write_csv(os.path.join(args.out, "ospa.csv"), aggs, args.float_format)
    with open(os.path.join(args.out, "tracks.json"), "w") as fh:
        json.dump(_tracks(aggs, args.dump_trials), fh)
    summary = {
        "scenario": cfg.name, "config_hash": scenario_hash(cfg), "seed": args.seed,
        "git_describe": _git_describe(), "version": __version__, "runs": args.runs,
        "form": args.form, "fusion": args.fusion, "steady_start": start,
        "modes": {a.mode: {"steady_ospa": a.steady_ospa(start).tolist(),
                           "card_bias": (a.card - a.card_true)[:, start:].mean(axis=1).tolist(),
                           "lam_bias": (a.lam - a.card_true)[:, start:].mean(axis=1).tolist()}
                  for a in aggs},
        "elapsed_s": round(elapsed, 3),
    }
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"steady-state mean OSPA (steps >= {start}, {args.runs} runs)")
    print(summary_table(aggs, start))
    return 0


def cmd_oracle_check(args):
    if args.cells > MAX_CELLS or args.cells < 1:
        print(f"error: --cells must lie in [1, {MAX_CELLS}]", file=sys.stderr)
        return 2
    if not 0 <= args.n_max <= MAX_CARD:
        print(f"error: --n-max must lie in [0, {MAX_CARD}]", file=sys.stderr)
        return 2
    results = run_suite(args.cells, args.n_max, args.cases, args.seed)
    ok = True
    for name, (passed, detail) in results.items():
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def read_points(path):
    """Whitespace- or comma-separated coordinates, one point per line."""
    rows = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.replace(",", " ").split()])
            except ValueError:
                raise ValueError(f"{path}:{n}: not a list of numbers") from None
    if not rows:
        return np.zeros((0, 2))
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have different lengths")
    return np.array(rows)


def cmd_ospa(args):
    try:
        x, y = read_points(args.file1), read_points(args.file2)
        if x.size and y.size and x.shape[1] != y.shape[1]:
            raise ValueError("point sets have different dimensions")
        total, loc, card = ospa(x, y, args.c, args.p)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{total:.12g} {loc:.12g} {card:.12g}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bird", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo tracking experiment")
    r.add_argument("--scenario", default="paper-fig6",
                   help=f"built-in name ({', '.join(BUILTIN)}) or a scenario JSON file")
    r.add_argument("--mode", nargs="+", choices=MODES, default=["m1", "m2", "m3"])
    r.add_argument("--form", type=int, choices=(1, 2, 3), default=3)
    r.add_argument("--fusion", choices=("bird", "gci"), default="bird")
    r.add_argument("--consensus-steps", type=int)
    r.add_argument("--duration", type=int, help="override the scenario length")
    r.add_argument("--runs", type=int, default=100)
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out", default="results")
    r.add_argument("--float-format", choices=("repr", "hex"), default="repr")
    r.add_argument("--dump-trials", type=int, default=5,
                   help="trials per mode written to tracks.json")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle-check", help="exact finite-grid property suite")
    o.add_argument("--cells", type=int, default=8)
    o.add_argument("--n-max", type=int, default=3)
    o.add_argument("--cases", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle_check)

    m = sub.add_parser("ospa", help="OSPA distance between two point-set files")
    m.add_argument("file1")
    m.add_argument("file2")
    m.add_argument("--c", type=float, default=100.0)
    m.add_argument("--p", type=float, default=2.0)
    m.set_defaults(func=cmd_ospa)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
