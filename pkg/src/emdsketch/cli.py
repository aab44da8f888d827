"""emd-sketch command line.

Exit codes: 0 success, 1 contract violation or bad usage, 2 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import seeding
from .errors import ContractViolation
from .report import ExperimentConfig, write_report

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _ints(text: str) -> list:
    return [int(t) for t in str(text).split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--delta", default=None, help="grid side (comma list for calibrate)")
    common.add_argument("--dims", type=int, default=None)
    common.add_argument("--k", type=int, default=2)
    common.add_argument("--epsilon", type=float, default=0.25)
    common.add_argument("--lambda", dest="lam", type=float, default=None)
    common.add_argument("--m", type=int, default=None, help="sketch rows")
    common.add_argument("--reps", type=int, default=None, help="pipelines R")
    common.add_argument("--t-param", type=int, default=1)
    common.add_argument("--seed", type=int, default=None, help="root seed (default 7)")
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--calibration", default=None)
    p = _Parser(prog="emd-sketch", description="EMD sketching and sparse recovery toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("emd", parents=[common], help="exact EMD of two measure files")
    s.add_argument("a")
    s.add_argument("b")
    s = sub.add_parser("embed", parents=[common], help="grid (or prefix-sum) embedding of a measure")
    s.add_argument("x")
    s.add_argument("--minus", default=None)
    s = sub.add_parser("sketch", parents=[common], help="amplified Cauchy sketch of a measure")
    s.add_argument("x")
    s.add_argument("--eps-c", type=float, default=0.2)
    s = sub.add_parser("estimate", parents=[common], help="distance estimate from a stored sketch")
    s.add_argument("sketch")
    s.add_argument("y")
    s = sub.add_parser("net", parents=[common], help="build and dump nested nets around an anchor")
    s.add_argument("anchor", nargs="?")
    s.add_argument("--levels", type=int, default=3)
    s = sub.add_parser("recover", parents=[common], help="k-sparse recovery of a measure")
    s.add_argument("x")
    s.add_argument("--mode", choices=("sketch", "oracle"), default="sketch")
    s.add_argument("--eps-c", type=float, default=None)
    s = sub.add_parser("median1", parents=[common], help="1-median on a line from a sketch")
    s.add_argument("x")
    s = sub.add_parser("mediand", parents=[common], help="Euclidean 1-median in the plane from a sketch")
    s.add_argument("x")
    s.add_argument("--C-G", dest="C_G", type=float, default=None)
    s = sub.add_parser("packing", parents=[common], help="packing family and certificates")
    s = sub.add_parser("bench", parents=[common], help="run a suite")
    s.add_argument("--suite", choices=("acceptance",), default="acceptance")
    s.add_argument("--criteria", default=None, help="comma list, default all")
    s = sub.add_parser("calibrate", parents=[common], help="fit c_L and D_eff")
    return p


def _config(args) -> ExperimentConfig:
    delta = args.delta
    return ExperimentConfig(
        command=args.command, delta=int(_ints(delta)[0]) if delta else 16,
        dims=args.dims or 2, k=args.k, epsilon=args.epsilon, lam=args.lam, m=args.m, reps=args.reps,
        t_param=args.t_param, seed=args.seed, trials=args.trials, suite=getattr(args, "suite", None),
        criteria=_ints(args.criteria) if getattr(args, "criteria", None) else [],
        inputs=[str(getattr(args, a)) for a in ("a", "b", "x", "sketch", "y", "anchor", "minus")
                if getattr(args, a, None)],
        calibration=args.calibration, out=args.out)


def _calibration(args):
    return args.calibration or os.environ.get("EMD_SKETCH_CALIBRATION")


def _emit(args, cfg, name, header, rows, summary):
    if args.out:
        write_report(args.out, name, cfg, header, rows, summary)
    print(json.dumps(summary, sort_keys=True))


def cmd_emd(args, cfg):
    from .measure import emd_exact, read_measure
    a, b = read_measure(args.a), read_measure(args.b)
    cost, plan = emd_exact(a, b)
    rows = [(" ".join(map(str, s)), " ".join(map(str, t)), w) for s, t, w in plan.edges]
    _emit(args, cfg, "emd", ["source", "target", "mass"], rows, {"emd": cost})


def cmd_embed(args, cfg):
    from .embed import decode_key, embed_cdf, embed_grid, sample_shift
    from .measure import read_measure
    x = read_measure(args.x)
    minus = read_measure(args.minus) if args.minus else None
    if x.dims == 1:
        v, shift = embed_cdf(x, minus), None
    else:
        shift = sample_shift(x.delta, seeding.child_seed(args.seed, seeding.EMBED), x.dims)
        v = embed_grid(x, minus, shift)
    rows = [(*decode_key(int(k), x.dims), float(val)) for k, val in zip(v.keys, v.values)] if x.dims == 2 else \
        [(0, i, float(val)) for i, val in enumerate(v.values)]
    header = ["level", "cx", "cy", "value"] if x.dims == 2 else ["level", "index", "value"]
    _emit(args, cfg, "embed", header, rows,
          {"l1": v.l1(), "nnz": v.nnz, "shift": list(shift.s) if shift else None})


def _sketch_params(args, x, eps_c):
    from .calibration import constants_for
    from .l1sketch import SketchParams
    if x.dims == 1:
        return SketchParams(x.delta, 1, args.reps or 9, args.m or 2000,
                            seeding.child_seed(args.seed, seeding.SKETCH), eps_c, 1.0, "cdf")
    c_L, _ = constants_for(x.delta, 2, eps_c, _calibration(args))
    return SketchParams(x.delta, 2, args.reps or 9, args.m or 64,
                        seeding.child_seed(args.seed, seeding.SKETCH), eps_c, c_L, "grid")


def cmd_sketch(args, cfg):
    from .l1sketch import AmplifiedSketch, save_sketch
    from .measure import read_measure
    x = read_measure(args.x)
    sm = AmplifiedSketch(_sketch_params(args, x, args.eps_c)).apply(x)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_sketch(out / "sketch.json", sm)
    print(json.dumps({"sketch": str(out / "sketch.json"), "R": sm.params.R, "m": sm.params.m}, sort_keys=True))


def cmd_estimate(args, cfg):
    from .l1sketch import estimate_distance, load_sketch
    from .measure import read_measure
    sm = load_sketch(args.sketch)
    est = estimate_distance(sm, read_measure(args.y))
    _emit(args, cfg, "estimate", ["estimate"], [(est,)], {"estimate": est})


def cmd_net(args, cfg):
    from .measure import read_measure
    from .nets import NetRegistry
    from .recovery import center_index, derive_params, get_universe
    delta = int(_ints(args.delta)[0]) if args.delta else 16
    dims = args.dims or 2
    U = get_universe(delta, dims, args.k, 20)
    Lambda = 2.0 * dims * delta
    p = derive_params(args.epsilon, args.lam or 0.05 * delta, Lambda)
    y0 = center_index(U)
    anchor = y0
    if args.anchor:
        anchor = U.index_of(read_measure(args.anchor))
        if anchor < 0:
            raise ContractViolation("anchor is not a 1/20-granular k-sparse measure")
    reg = NetRegistry(U, p.radii(), y0)
    levels = min(args.levels, p.L)
    sizes = [len(reg.expand(i, anchor, p.beta * p.radius(i))) for i in range(1, levels + 1)]
    summary = {"levels": levels, "sizes": sizes, "radii": [p.radius(i) for i in range(levels + 1)]}
    if args.out:
        reg.dump(Path(args.out) / "net", levels=range(levels + 1))
    _emit(args, cfg, "net", ["level", "r_i", "size"],
          [(i + 1, p.radius(i + 1), s) for i, s in enumerate(sizes)], summary)


def cmd_recover(args, cfg):
    from .measure import read_measure
    from .recovery import get_universe, recover_interval, recover_square
    x = read_measure(args.x)
    lam = args.lam if args.lam is not None else 0.05 * x.delta
    if x.dims == 1:
        kw = {"m": args.m} if args.m else {}
        res = recover_interval(x, args.k, args.epsilon, lam, args.seed, mode=args.mode, R=args.reps,
                               eps_c=args.eps_c, **kw)
    else:
        kw = {"m": args.m} if args.m else {}
        if args.eps_c is not None:
            kw["eps_c"] = args.eps_c
        res = recover_square(x, args.k, args.epsilon, lam, args.seed, mode=args.mode, R=args.reps,
                             calibration=_calibration(args), **kw)
    U = get_universe(x.delta, x.dims, args.k, res.meta["N"])
    text = res.to_json(U)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "recovery.json").write_text(text + "\n")
        rows = [(s.level, s.size, s.chosen, s.q, s.radius) for s in res.trace]
        write_report(d, "trace", cfg, ["level", "size", "chosen", "q", "radius"], rows,
                     {"terminated_at": res.terminated_at, "queries": res.queries})
    print(text)


def _weights_1d(x):
    from .median import MedianInstance1D
    return MedianInstance1D.from_points(x.delta, x.points[:, 0], x.weights)


def cmd_median1(args, cfg):
    from .measure import read_measure
    from .median import median_1d
    x = read_measure(args.x)
    if x.dims != 1:
        raise ContractViolation("median1 needs a 1D measure file")
    inst = _weights_1d(x)
    j, est = median_1d(inst, args.m or 2000, args.epsilon, args.seed)
    cost = float(inst.cost(j)[0])
    _emit(args, cfg, "median1", ["j_hat", "cost_estimate", "cost"], [(j, est, cost)],
          {"j_hat": j, "cost_estimate": est, "cost": cost})


def cmd_mediand(args, cfg):
    from .measure import read_measure
    from .median import C_G_DEFAULT, euclid_cost, median_dd
    x = read_measure(args.x)
    p, est = median_dd(x.points, x.weights, x.dims, x.delta, args.m or 2000, args.epsilon, args.seed,
                       args.C_G or C_G_DEFAULT)
    cost = float(euclid_cost(x.points, x.weights, [p])[0])
    _emit(args, cfg, "mediand", ["p_hat", "cost_estimate", "cost"], [(" ".join(map(str, p)), est, cost)],
          {"p_hat": list(p), "cost_estimate": est, "cost": cost})


def cmd_packing(args, cfg):
    from .measure import write_measure
    from .packing import certificate, gen_packing_1d, gen_packing_2d
    delta = int(_ints(args.delta)[0]) if args.delta else 64
    dims = args.dims or 1
    fam = gen_packing_1d(args.k, delta) if dims == 1 else gen_packing_2d(args.k, delta)
    g = seeding.rng(args.seed, seeding.PACKING)
    idx = fam.sample(args.trials or 20, g)
    rows = [(" ".join(map(str, I)), certificate(fam, I)) for I in idx]
    if args.out:
        d = Path(args.out) / "family"
        d.mkdir(parents=True, exist_ok=True)
        write_measure(d / "A.measure", fam.A)
        for I in idx:
            write_measure(d / ("B_" + "_".join(map(str, I)) + ".measure"), fam.B(I))
    _emit(args, cfg, "packing", ["I", "emd"], rows,
          {"k": fam.k, "delta": delta, "dims": dims, "cardinality": fam.cardinality,
           "certificate": fam.certificate_value, "max_gap": max(abs(r[1] - fam.certificate_value) for r in rows)})


def cmd_bench(args, cfg):
    from .acceptance import run_suite
    crit = _ints(args.criteria) if args.criteria else None
    res = run_suite(crit, args.seed, args.trials, args.out)
    print(f"{sum(o.passed for o in res)}/{len(res)} criteria passed")
    return 0


def cmd_calibrate(args, cfg):
    from .calibration import DEFAULT_SAMPLES, calibrate
    deltas = _ints(args.delta) if args.delta else [16, 64]
    path = Path(args.out or "calibration.json")
    if path.suffix != ".json":
        path = path / "calibration.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = calibrate(deltas, args.dims or 2, args.trials or DEFAULT_SAMPLES, args.seed, path)
    print(json.dumps({"path": str(path), "entries": doc["entries"]}, sort_keys=True))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:         # --help
        return int(e.code or 0)
    if args.seed is None:
        from .calibration import DEFAULT_SEED
        args.seed = DEFAULT_SEED if args.command == "calibrate" else 7
    try:
        cfg = _config(args)
        rc = globals()[f"cmd_{args.command}"](args, cfg)
        return int(rc or 0)
    except ContractViolation as e:
        print(f"contract violation: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
