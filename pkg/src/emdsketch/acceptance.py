"""Acceptance suite: twelve property checks against exact oracles.

Each check returns an Outcome whose rows go to a per-check CSV; the suite CSV
has one line per check.  Sample counts default to the published thresholds;
``trials`` scales every count down for smoke runs (a scaled run is not an
acceptance run and says so in its summary).
"""
from __future__ import annotations

import contextlib
import filecmp
import io
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .calibration import DEFAULT_SEED, calibrate_grid, d_eff, grid_ratios
from .cover import BallCoverRequest, cover_ball, growth_check, sample_in_ball
from .embed import GridShift, embed_grid
from .instances import clusters_with_noise, random_probability
from .l1sketch import AmplifiedSketch, CauchySketcher, SketchParams, default_rows, median_estimate, sketch
from .measure import GridMeasure, best_k_sparse, emd, emd_cdf_1d
from .median import MedianInstance1D, euclid_cost, median_1d, median_dd
from .packing import certificate, doubling_probe, gen_packing_1d
from .recovery import get_universe, recover_interval, recover_square
from .report import ExperimentConfig, write_report

TOL = 1e-9


@dataclass
class Outcome:
    criterion: int
    name: str
    passed: bool
    measured: str
    threshold: str
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.criterion:2d} {self.name}: {self.measured} (need {self.threshold}) {self.seconds:.1f}s"


def _n(full: int, trials: int | None) -> int:
    return full if trials is None else max(1, min(full, int(trials)))


def _g(seed: int, crit: int, *path) -> np.random.Generator:
    return seeding.rng(seed, seeding.BENCH, crit, *path)


# 1
def cdf_isometry(seed: int, trials=None) -> Outcome:
    n = _n(200, trials)
    rows = []
    for i in range(n):
        g = _g(seed, 1, i)
        a = random_probability(64, 1, int(g.integers(1, 9)), g)
        b = random_probability(64, 1, int(g.integers(1, 9)), g)
        e, c = emd(a, b), emd_cdf_1d(a, b)
        rows.append((i, e, c, abs(e - c)))
    worst = max(r[3] for r in rows)
    ok = sum(r[3] <= TOL for r in rows)
    return Outcome(1, "cdf isometry", ok == n, f"{ok}/{n} agree, max gap {worst:.2e}", "100% within 1e-9",
                   ["i", "emd_exact", "emd_cdf", "gap"], rows)


# 2
def metric_axioms(seed: int, trials=None) -> Outcome:
    n = _n(200, trials)
    rows = []
    for i in range(n):
        g = _g(seed, 2, i)
        x, y, z = (random_probability(16, 2, int(g.integers(1, 5)), g) for _ in range(3))
        xy, yx, xz, zy = emd(x, y), emd(y, x), emd(x, z), emd(z, y)
        rows.append((i, xy, yx, xz + zy, abs(xy - yx) <= TOL, xy <= xz + zy + TOL))
    ok = sum(r[4] and r[5] for r in rows)
    return Outcome(2, "metric axioms", ok == n, f"{ok}/{n} triples", "100% within 1e-9",
                   ["i", "d_xy", "d_yx", "d_xz_plus_d_zy", "symmetric", "triangle"], rows)


# 3
def embedding_lower_bound(seed: int, trials=None) -> Outcome:
    """c_L from the default calibration batch, tested on a disjoint batch."""
    n = _n(500, trials)
    rows, bad = [], 0
    for delta in (16, 64):
        c_L = calibrate_grid(delta)["c_L"]
        r = grid_ratios(delta, 2, n, DEFAULT_SEED + 1 + seed)
        fails = int(np.sum(r < c_L))
        bad += fails
        rows.append((delta, c_L, float(r.min()), n, fails))
    return Outcome(3, "embedding lower bound", bad == 0, f"{bad} violations in {2 * n} held-out samples",
                   "EMD <= ||G_s mu||_1 / c_L on 100%",
                   ["delta", "c_L", "min_ratio", "samples", "violations"], rows)


# 4
def _diag_chain(delta: int):
    """Unit edges (3i, 3i) -> (3i + 1, 3i) carrying equal mass; EMD is exactly 1.

    Every target is at ℓ1 distance >= 1 from every source, so any plan pays
    at least 1 per unit of mass, and the pairing pays exactly that."""
    i = np.arange((delta - 2) // 3 + 1)
    P = np.stack([3 * i, 3 * i], 1)
    w = np.full(len(P), 1.0 / len(P))
    return GridMeasure(delta, 2, P, w), GridMeasure(delta, 2, P + [1, 0], w)


def sparse_distortion_trend(seed: int, trials=None) -> Outcome:
    n = _n(500, trials)
    rows, q = [], {}
    for delta in (16, 64, 256, 1024):
        g = _g(seed, 4, delta)
        sp, de = [], []
        dx, dy = _diag_chain(delta)
        for _ in range(n):
            x = GridMeasure.point_mass(delta, tuple(int(c) for c in g.integers(0, delta, 2)))
            while True:
                y = random_probability(delta, 2, int(g.integers(1, 5)), g)
                e = emd(x, y)
                if e > 0:
                    break
            s = GridShift(tuple(int(v) for v in g.integers(0, delta, 2)))
            sp.append(embed_grid(x, y, s).l1() / e)
            de.append(embed_grid(dx, dy, s).l1())
        q[delta] = (float(np.quantile(sp, 0.99)), float(np.quantile(de, 0.99)))
        rows.append((delta, "sparse", q[delta][0]))
        rows.append((delta, "dense", q[delta][1]))
    rs, rd = q[1024][0] / q[16][0], q[1024][1] / q[16][1]
    return Outcome(4, "sparse distortion trend", rs < rd,
                   f"q99 ratio 1024/16: sparse {rs:.3f}, dense {rd:.3f}", "sparse < dense",
                   ["delta", "family", "q99_ratio"], rows, {"sparse_ratio": rs, "dense_ratio": rd})


# 5
def _query_failure(R: int, n: int, seed: int, tag: int, eps_c: float = 0.2, m: int = 64):
    """Fraction of fresh (sketch, query) draws whose amplified estimate leaves [EMD, D_eff·EMD]."""
    e = calibrate_grid(16)
    c_L, D = e["c_L"], d_eff(e["D_raw"], eps_c)
    fails = 0
    for t in range(n):
        g = _g(seed, 5, tag, t)
        x = clusters_with_noise(16, 2, 2, 20, g)
        y = random_probability(16, 2, int(g.integers(1, 3)), g)
        sp = SketchParams(16, 2, R, m, seeding.child_seed(seed, seeding.BENCH, 5, tag, t), eps_c, c_L)
        est = AmplifiedSketch(sp).apply(x).estimate(y)
        true = emd(x, y)
        fails += not (true - TOL <= est <= D * true + TOL)
    return fails / n, D


def cauchy_estimator(seed: int, trials=None) -> Outcome:
    eps_c = 0.1
    m = default_rows(eps_c)
    n = _n(1000, trials)
    g = _g(seed, 5, 0)
    a = random_probability(16, 2, 3, g)
    b = random_probability(16, 2, 3, g)
    v = embed_grid(a, b, GridShift((3, 5)))
    norm = v.l1()
    inside = 0
    for t in range(n):
        est = median_estimate(sketch(v, CauchySketcher(m, seeding.child_seed(seed, seeding.BENCH, 5, 1, t))))
        inside += abs(est / norm - 1) <= 0.2
    f9, D = _query_failure(9, _n(600, trials), seed, 9)
    R13 = 2 * math.ceil(math.log2(64)) + 1
    f13, _ = _query_failure(R13, _n(3000, trials), seed, 13)
    frac = inside / n
    ok = frac >= 0.95 and f9 <= 1 / 3 and f13 <= 1 / (3 * 64)
    rows = [("single", m, 1, n, frac), ("amplified", 64, 9, _n(600, trials), f9),
            ("amplified", 64, R13, _n(3000, trials), f13)]
    return Outcome(5, "cauchy estimator", ok,
                   f"in-band {frac:.3f}, failure R=9 {f9:.4f}, R={R13} {f13:.5f}",
                   ">= 0.95, <= 1/3, <= 1/192",
                   ["kind", "m", "R", "trials", "value"], rows, {"D_eff": D})


# 6
def net_coverage(seed: int, trials=None) -> Outcome:
    n = _n(200, trials)
    R = 4.0
    rows, worst, covered, total = [], 0.0, 0, 0
    for k in (1, 2, 3):
        g = _g(seed, 6, k)
        mu = random_probability(16, 2, k, g)
        while mu.support_size < k:
            mu = random_probability(16, 2, k, g)
        bc = cover_ball(BallCoverRequest(mu, R, k))
        wk = 0.0
        for _ in range(n):
            nu = sample_in_ball(mu, R, k, g)
            w = bc.witness(nu)
            d = emd(nu, w.measure)
            ok = bc.contains(w.assignment) and d <= R / 2 + TOL
            covered += ok
            total += 1
            wk = max(wk, d)
        worst = max(worst, wk)
        rows.append(("coverage", 16, k, n, wk / R))
    sizes = []
    for delta in (16, 64, 256):
        for k in (1, 2, 3):
            mu = GridMeasure.from_atoms(delta, 2, {((delta // 4) * (i + 1) % delta, delta // 3): 1 / k for i in range(k)})
            y = cover_ball(BallCoverRequest(mu, 1.0, k)).log_size()
            sizes.append((delta, k, y))
            rows.append(("log_size", delta, k, 1, y))
    c, c0, held = growth_check(sizes)
    grow_ok = all(h[4] for h in held)
    ok = covered == total and grow_ok
    return Outcome(6, "net coverage", ok,
                   f"{covered}/{total} within R/2 (worst {worst / R:.4f} R); growth c={c:.2f} c'={c0:.2f} "
                   f"held-out {'ok' if grow_ok else 'exceeded'}",
                   "100% and log|cover| <= c k loglog Delta + c'",
                   ["kind", "delta", "k", "samples", "value"], rows, {"c": c, "c0": c0})


# 7
def oracle_search(seed: int, trials=None) -> Outcome:
    n = _n(100, trials)
    eps, lam = 0.25, 0.05 * 16
    U = get_universe(16, 2, 2, 20)
    rows, bad = [], 0
    for t in range(n):
        g = _g(seed, 7, t)
        x = clusters_with_noise(16, 2, 2, 20, g)
        res = recover_square(x, 2, eps, lam, seeding.child_seed(seed, seeding.BENCH, 7, t),
                             mode="oracle", keep_sets=True, granularity=20)
        p = res.params
        opt = float(U.dist_measure(x).min())
        ystar = int(np.argmin(U.dist_measure(x)))
        got = emd(x, res.estimate)
        guar = got <= max((1 + eps) * opt, lam) + TOL
        # key estimate: q(y_{i-1}) <= gamma r_{i-1} implies rho(y*, S_i) <= r_i
        q_prev, key_ok = res.q_y0, True
        for i, S in enumerate(res.sets, start=1):
            if q_prev <= p.gamma * p.radius(i - 1) and S:
                key_ok &= float(U.dist_member(ystar, S).min()) <= p.radius(i) + TOL
            if i - 1 < len(res.trace):
                q_prev = res.trace[i - 1].q
        if res.terminated_at == "L":
            ret_ok = got <= 2 * p.gamma * p.alpha ** p.L * p.Lambda + TOL
        else:
            ret_ok = opt == 0 and got == 0 or (opt > 0 and got / opt < p.return_bound())
        ok = guar and key_ok and ret_ok
        bad += not ok
        rows.append((t, opt, got, res.terminated_at, guar, key_ok, ret_ok))
    return Outcome(7, "oracle-mode search", bad == 0, f"{n - bad}/{n} runs pass guarantee and audits",
                   "100%", ["trial", "opt", "recovered", "terminated_at", "guarantee", "key_estimate", "return"], rows)


# 8
def sketch_recovery(seed: int, trials=None) -> Outcome:
    n = _n(50, trials)
    eps, lam, eps_c = 0.25, 0.05 * 16, 0.2
    e = calibrate_grid(16)
    D = d_eff(e["D_raw"], eps_c)
    rows, good = [], 0
    for t in range(n):
        g = _g(seed, 8, t)
        x = clusters_with_noise(16, 2, 2, 20, g)
        res = recover_square(x, 2, eps, lam, seeding.child_seed(seed, seeding.BENCH, 8, t), eps_c=eps_c,
                             granularity=20)
        opt = best_k_sparse(x, 2)[1]
        got = emd(x, res.estimate)
        ok = got <= (1 + eps) * D * opt + lam + TOL
        good += ok
        rows.append((t, opt, got, got / opt if opt > 0 else math.inf, ok))
    frac = good / n
    return Outcome(8, "sketch recovery", frac >= 2 / 3, f"{good}/{n} within (1+eps) D_eff opt + lambda "
                   f"(D_eff={D:.3f})", ">= 2/3", ["trial", "opt", "recovered", "ratio", "ok"], rows,
                   {"D_eff": D})


# 9
def interval_recovery(seed: int, trials=None) -> Outcome:
    n = _n(30, trials)
    eps, lam = 0.3, 0.5
    rows, good = [], 0
    for t in range(n):
        g = _g(seed, 9, t)
        x = clusters_with_noise(64, 1, 2, 20, g)
        res = recover_interval(x, 2, eps, lam, seeding.child_seed(seed, seeding.BENCH, 9, t),
                               granularity=20)
        opt = best_k_sparse(x, 2)[1]
        got = emd(x, res.estimate)
        ok = got <= (1 + eps) * opt + lam + TOL
        good += ok
        rows.append((t, opt, got, got / opt if opt > 0 else math.inf, ok))
    return Outcome(9, "interval recovery", good / n >= 2 / 3, f"{good}/{n} within 1.3 opt + {lam}", ">= 2/3",
                   ["trial", "opt", "recovered", "ratio", "ok"], rows)


# 10
def packing_certificates(seed: int, trials=None) -> Outcome:
    n = _n(20, trials)
    rows, bad = [], 0
    for delta in (64, 256):
        fam = gen_packing_1d(4, delta)
        g = _g(seed, 10, delta)
        for I in fam.sample(n, g):
            c = certificate(fam, I)
            bad += abs(c - 2.0) > TOL
            rows.append(("certificate", delta, " ".join(map(str, I)), c))
    sizes = {}
    for delta in (64, 1024):
        rep = doubling_probe(gen_packing_1d(4, delta), g=_g(seed, 10, 0, delta), samples=_n(200, trials))
        sizes[delta] = rep.separated
        rows.append(("probe", delta, f"{rep.distinct} distinct, {rep.in_ball} in ball", rep.separated))
    ok = bad == 0 and sizes[1024] > sizes[64]
    return Outcome(10, "packing certificates", ok,
                   f"{2 * n - bad}/{2 * n} exact; probe {sizes[64]} -> {sizes[1024]}",
                   "100% within 1e-9 and strict growth", ["kind", "delta", "index", "value"], rows)


# 11
def one_median(seed: int, trials=None) -> Outcome:
    n = _n(100, trials)
    eps = 0.2
    rows, ok1, okd = [], 0, 0
    P = np.stack(np.meshgrid(np.arange(8), np.arange(8), indexing="ij"), -1).reshape(-1, 2)
    for t in range(n):
        g = _g(seed, 11, t)
        inst = MedianInstance1D.from_points(64, g.integers(0, 64, 5), g.random(5))
        j, _ = median_1d(inst, 2000, eps, seeding.child_seed(seed, seeding.BENCH, 11, 1, t))
        c = inst.cost(np.arange(64))
        a = bool(c[j] <= (1 + eps) * c.min() + TOL)
        pts, w = g.integers(0, 8, (5, 2)), g.random(5)
        p, _ = median_dd(pts, w, 2, 8, 2000, eps, seeding.child_seed(seed, seeding.BENCH, 11, 2, t))
        cd = euclid_cost(pts, w, P)
        b = bool(euclid_cost(pts, w, [p])[0] <= (1 + eps) ** 2 * cd.min() + TOL)
        ok1 += a
        okd += b
        rows.append((t, float(c[j]), float(c.min()), a, float(euclid_cost(pts, w, [p])[0]), float(cd.min()), b))
    return Outcome(11, "1-median", ok1 / n >= 0.9 and okd / n >= 0.9, f"1D {ok1}/{n}, 2D {okd}/{n}", ">= 90% each",
                   ["trial", "cost_1d", "opt_1d", "ok_1d", "cost_2d", "opt_2d", "ok_2d"], rows)


# 12
def determinism(seed: int, trials=None) -> Outcome:
    """Rerun two cheap checks and an oracle recovery report into fresh directories; compare bytes."""
    from .cli import main as cli_main
    rows, same = [], True
    with tempfile.TemporaryDirectory() as tmp:
        x = clusters_with_noise(16, 2, 2, 20, _g(seed, 12))
        from .measure import write_measure
        xp = Path(tmp) / "x.measure"
        write_measure(xp, x)
        for run in ("a", "b"):
            out = Path(tmp) / run
            run_suite([1, 10], seed, trials=_n(20, trials), out=out / "suite", echo=False)
            with contextlib.redirect_stdout(io.StringIO()):
                cli_main(["recover", "--delta", "16", "--k", "2", "--epsilon", "0.25", "--seed", str(seed),
                          "--mode", "oracle", "--out", str(out / "recover"), str(xp)])
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        for f in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
            eq = (b / f).exists() and filecmp.cmp(a / f, b / f, shallow=False)
            same &= eq
            rows.append((str(f), eq))
    return Outcome(12, "determinism", same and bool(rows), f"{sum(r[1] for r in rows)}/{len(rows)} files identical",
                   "byte-identical", ["file", "identical"], rows)


CHECKS = {1: cdf_isometry, 2: metric_axioms, 3: embedding_lower_bound, 4: sparse_distortion_trend,
          5: cauchy_estimator, 6: net_coverage, 7: oracle_search, 8: sketch_recovery,
          9: interval_recovery, 10: packing_certificates, 11: one_median, 12: determinism}


def run_suite(criteria=None, seed: int = 7, trials=None, out=None, echo: bool = True) -> list:
    criteria = sorted(criteria or CHECKS)
    cfg = ExperimentConfig("bench", seed=seed, trials=trials, suite="acceptance", criteria=list(criteria))
    results = []
    for c in criteria:
        t0 = time.perf_counter()
        o = CHECKS[c](seed, trials)
        o.seconds = time.perf_counter() - t0
        results.append(o)
        if echo:
            print(o.line(), flush=True)
        if out is not None:
            write_report(out, f"criterion_{c:02d}", cfg, o.header, o.rows,
                         dict(o.summary, passed=o.passed, measured=o.measured, threshold=o.threshold))
    if out is not None:
        rows = [(o.criterion, o.name, o.passed, o.measured, o.threshold) for o in results]
        write_report(out, "acceptance", cfg, ["criterion", "name", "passed", "measured", "threshold"], rows,
                     {"passed": sum(o.passed for o in results), "total": len(results),
                      "scaled": trials is not None})
    return results
