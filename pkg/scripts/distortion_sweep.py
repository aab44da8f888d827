"""Distribution of ||G_s mu||_1 / EMD over calibration pairs, per grid size.

    python3 scripts/distortion_sweep.py --deltas 16,64,256 --samples 500 --out results/distortion
"""
import argparse

import numpy as np

from emdsketch.calibration import DEFAULT_SEED, grid_ratios
from emdsketch.report import ExperimentConfig, write_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--deltas", default="16,64,256")
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--out", default="results/distortion")
    a = ap.parse_args()
    rows = []
    for d in (int(v) for v in a.deltas.split(",")):
        r = grid_ratios(d, 2, a.samples, a.seed)
        for q in (0.0, 0.5, 0.9, 0.99, 1.0):
            rows.append((d, q, float(np.quantile(r, q))))
        print(f"delta={d:5d} min={r.min():.3f} median={np.median(r):.3f} q90={np.quantile(r, .9):.3f} "
              f"max={r.max():.3f}")
    cfg = ExperimentConfig("distortion_sweep", seed=a.seed, trials=a.samples, out=a.out)
    write_report(a.out, "distortion", cfg, ["delta", "quantile", "ratio"], rows)


if __name__ == "__main__":
    main()
