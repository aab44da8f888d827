"""Size of a separated subfamily of the packing inside a ball, as the grid grows.

    python3 scripts/packing_probe.py --k 4 --deltas 64,256,1024
"""
import argparse

import numpy as np

from emdsketch.packing import doubling_probe, gen_packing_1d
from emdsketch.report import ExperimentConfig, write_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--deltas", default="64,256,1024")
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="results/packing")
    a = ap.parse_args()
    rows = []
    for d in (int(v) for v in a.deltas.split(",")):
        fam = gen_packing_1d(a.k, d)
        rep = doubling_probe(fam, samples=a.samples, g=np.random.default_rng(a.seed))
        rows.append((d, fam.cardinality, rep.distinct, rep.in_ball, rep.separated, rep.log2_size))
        print(f"delta={d:5d} |family|={fam.cardinality} distinct={rep.distinct} separated={rep.separated}")
    cfg = ExperimentConfig("packing_probe", k=a.k, dims=1, seed=a.seed, trials=a.samples, out=a.out)
    write_report(a.out, "probe", cfg, ["delta", "cardinality", "distinct", "in_ball", "separated", "log2_size"],
                 rows)


if __name__ == "__main__":
    main()
