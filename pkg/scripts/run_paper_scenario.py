"""Full desk-scale run of the five-sensor scenario and its ordering checks.

    python3 scripts/run_paper_scenario.py --runs 100 --seed 42 --out results/paper-fig6

Runs M1, M2 and M3 through the ``bird run`` command, then scores the stored
ospa.csv. Set BIRD_THREADS to use several cores.
"""
import argparse
import os
import time

from birdfusion.cli import main as bird
from birdfusion.report import ordering_checks, read_ospa_csv
from birdfusion.sim import BUILTIN


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="results/paper-fig6")
    p.add_argument("--score-only", action="store_true", help="only rescore an existing run")
    args = p.parse_args()
    if not args.score_only:
        t0 = time.perf_counter()
        code = bird(["run", "--scenario", "paper-fig6", "--runs", str(args.runs),
                     "--seed", str(args.seed), "--out", args.out])
        if code:
            raise SystemExit(code)
        print(f"wall time {time.perf_counter() - t0:.0f} s")
    data = read_ospa_csv(os.path.join(args.out, "ospa.csv"))
    for name, (ok, detail) in ordering_checks(data, BUILTIN["paper-fig6"]()).items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


if __name__ == "__main__":
    main()
