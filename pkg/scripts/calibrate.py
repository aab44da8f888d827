"""Write a calibration file (c_L, D_raw per grid size) for the sketch estimator.

    python3 scripts/calibrate.py --deltas 16,64 --out results/calibration.json
    EMD_SKETCH_CALIBRATION=results/calibration.json emd-sketch recover ...
"""
import argparse

from emdsketch.calibration import DEFAULT_SAMPLES, DEFAULT_SEED, calibrate, d_eff
from emdsketch.median import calibrate_C_G


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--deltas", default="16,64")
    ap.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--eps-c", type=float, default=0.2)
    ap.add_argument("--out", default="results/calibration.json")
    a = ap.parse_args()
    doc = calibrate(tuple(int(v) for v in a.deltas.split(",")), samples=a.samples, seed=a.seed, path=a.out,
                    C_G=calibrate_C_G(2, a.eps_c))
    for e in doc["entries"]:
        print(f"delta={e['delta']:5d} c_L={e['c_L']:.4f} D_raw={e['D_raw']:.3f} "
              f"D_eff(eps_c={a.eps_c})={d_eff(e['D_raw'], a.eps_c):.3f}")
    print(f"C_G={doc['C_G']:.3f} -> {a.out}")


if __name__ == "__main__":
    main()
