"""Sketch-mode recovery on noisy cluster inputs; compares against the brute-force k-median.

    python3 scripts/recovery_suite.py --trials 10 --delta 16 --k 2
"""
import argparse
import time

from emdsketch import best_k_sparse, emd
from emdsketch.calibration import constants_for
from emdsketch.instances import clusters_with_noise
from emdsketch.recovery import recover_square
from emdsketch.report import ExperimentConfig, write_report
from emdsketch.seeding import BENCH, child_seed, rng


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=int, default=16)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--epsilon", type=float, default=0.25)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--mode", choices=("sketch", "oracle"), default="sketch")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/recovery")
    a = ap.parse_args()
    _, D = constants_for(a.delta, 2, 0.2) if a.mode == "sketch" else (1.0, 1.0)
    rows, ok = [], 0
    for t in range(a.trials):
        x = clusters_with_noise(a.delta, 2, a.k, 20, rng(a.seed, BENCH, 100, t))
        opt = best_k_sparse(x, a.k)[1]
        t0 = time.perf_counter()
        res = recover_square(x, a.k, a.epsilon, a.lam, child_seed(a.seed, BENCH, 100, t), mode=a.mode)
        got = emd(x, res.estimate)
        bound = (1 + a.epsilon) * D * opt + a.lam
        ok += got <= bound
        rows.append((t, opt, got, bound, got <= bound))
        print(f"trial {t:3d}: opt={opt:.4f} got={got:.4f} bound={bound:.4f} "
              f"{'ok' if got <= bound else 'MISS'} ({time.perf_counter() - t0:.1f}s)")
    print(f"{ok}/{a.trials} within bound")
    cfg = ExperimentConfig("recovery_suite", delta=a.delta, k=a.k, epsilon=a.epsilon, lam=a.lam,
                           seed=a.seed, trials=a.trials, out=a.out)
    write_report(a.out, "recovery", cfg, ["trial", "opt", "emd", "bound", "ok"], rows,
                 {"within": ok, "trials": a.trials, "D_eff": D})


if __name__ == "__main__":
    main()
