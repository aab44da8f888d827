"""Run the acceptance suite and write per-criterion reports.

    python3 scripts/run_acceptance.py                 # full size, slow (about half an hour)
    python3 scripts/run_acceptance.py --trials 10     # scaled-down smoke run
    python3 scripts/run_acceptance.py --criteria 1,2,3
"""
import argparse
import sys

from emdsketch.acceptance import run_suite


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--criteria", default=None)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/acceptance")
    a = ap.parse_args()
    crit = [int(c) for c in a.criteria.split(",")] if a.criteria else None
    res = run_suite(crit, a.seed, a.trials, a.out)
    print(f"{sum(o.passed for o in res)}/{len(res)} criteria passed")
    return 0 if all(o.passed for o in res) else 1


if __name__ == "__main__":
    sys.exit(main())
