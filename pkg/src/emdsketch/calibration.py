"""Empirical constants for the sketches: c_L, D_eff and the coarse-embedding constant.

c_L is 0.9 times the smallest observed ratio ‖G_s(a - b)‖₁ / EMD(a, b) over
random (pair, shift) samples, so c_L⁻¹‖G_s μ‖₁ bounds EMD from above on every
shift with room to spare.  D_raw is the 0.9-quantile of the same ratio divided
by c_L; the estimator's distortion is D_eff = D_raw (1 + ε_c)/(1 - ε_c).

Half of the pairs are a random probability measure with 1-4 atoms against a
random 2-sparse measure with 1/20-granular weights, which is what recovery
compares.  The other half pair a random measure with a local perturbation of
itself (atoms moved by at most 1 per axis): the ratio is smallest for diagonal
neighbours that only the finest level separates, and with reach 1 enough
samples land there for the minimum to be the same on every seed batch.
"""
from __future__ import annotations

import functools
import json
import math
import os
from pathlib import Path

import numpy as np

from . import seeding
from .embed import GridShift, embed_coarse, embed_grid
from .errors import ContractViolation
from .instances import random_probability, random_sparse_granular
from .measure import GridMeasure, emd

ENV_VAR = "EMD_SKETCH_CALIBRATION"
DEFAULT_SEED = 20240917
DEFAULT_SAMPLES = 500
CAL_VERSION = 1


def local_perturbation(a, g: np.random.Generator, reach: int = 1):
    """Move a random fraction (or all) of each atom by at most ``reach`` per axis."""
    atoms: dict = {}
    for p, w in a.atoms().items():
        q = tuple(int(c) for c in np.clip(np.asarray(p) + g.integers(-reach, reach + 1, a.dims), 0, a.delta - 1))
        f = 1.0 if g.random() < 0.5 else float(g.random())
        atoms[p] = atoms.get(p, 0.0) + w * (1 - f)
        atoms[q] = atoms.get(q, 0.0) + w * f
    atoms = {p: w for p, w in atoms.items() if w > 1e-12}
    tot = sum(atoms.values())
    return GridMeasure.from_atoms(a.delta, a.dims, {p: w / tot for p, w in atoms.items()})


def sample_pairs(delta: int, dims: int, samples: int, seed: int):
    """Deterministic (a, b, shift) triples with a != b; odd i are local pairs."""
    out = []
    for i in range(samples):
        g = seeding.rng(seed, seeding.CALIBRATION, delta, dims, i)
        while True:
            a = random_probability(delta, dims, int(g.integers(1, 5)), g)
            b = local_perturbation(a, g) if i % 2 else random_sparse_granular(delta, dims, 2, 20, g)
            if a != b and emd(a, b) > 1e-9:
                break
        s = GridShift(tuple(int(v) for v in g.integers(0, delta, dims)))
        out.append((a, b, s))
    return out


def grid_ratios(delta: int, dims: int = 2, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED):
    r = []
    for a, b, s in sample_pairs(delta, dims, samples, seed):
        r.append(embed_grid(a, b, s).l1() / emd(a, b))
    return np.asarray(r)


def coarse_ratios(delta: int, t_param: int, dims: int = 2, samples: int = DEFAULT_SAMPLES,
                  seed: int = DEFAULT_SEED):
    r = []
    for a, b, s in sample_pairs(delta, dims, samples, seed):
        r.append(embed_coarse(a, b, t_param, shift=s).norm() / emd(a, b))
    return np.asarray(r)


def calibrate_grid(delta: int, dims: int = 2, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
                   coarse_t=()) -> dict:
    r = grid_ratios(delta, dims, samples, seed)
    c_L = 0.9 * float(r.min())
    entry = {"delta": int(delta), "dims": int(dims), "c_L": c_L,
             "D_raw": float(np.quantile(r, 0.9)) / c_L,
             "min_ratio": float(r.min()), "q90_ratio": float(np.quantile(r, 0.9)),
             "seed": int(seed), "sample_count": int(samples)}
    if coarse_t:
        entry["c_coarse"] = {str(t): 0.9 * float(coarse_ratios(delta, t, dims, samples, seed).min())
                             for t in coarse_t}
    return entry


def calibrate(deltas=(16, 64), dims: int = 2, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED,
              path=None, coarse_t=(), C_G: float | None = None) -> dict:
    doc = {"version": CAL_VERSION,
           "entries": [calibrate_grid(d, dims, samples, seed, coarse_t) for d in deltas]}
    if C_G is not None:
        doc["C_G"] = float(C_G)
    if path is not None:
        write_calibration(path, doc)
    return doc


def write_calibration(path, doc: dict):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_calibration(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CAL_VERSION:
        raise ContractViolation(f"unsupported calibration version {doc.get('version')}")
    return doc


@functools.lru_cache(maxsize=16)
def _default_entry(delta: int, dims: int) -> dict:
    return calibrate_grid(delta, dims)


def entry_for(delta: int, dims: int, calibration=None) -> dict:
    """Calibration entry from a doc, a file path, $EMD_SKETCH_CALIBRATION, or computed on the fly."""
    if calibration is None and os.environ.get(ENV_VAR):
        calibration = os.environ[ENV_VAR]
    if calibration is None:
        return _default_entry(int(delta), int(dims))
    doc = calibration if isinstance(calibration, dict) else load_calibration(calibration)
    for e in doc["entries"]:
        if e["delta"] == delta and e["dims"] == dims:
            return e
    raise ContractViolation(f"no calibration entry for delta={delta} dims={dims}")


def d_eff(D_raw: float, eps_c: float) -> float:
    return max(1.0, D_raw * (1.0 + eps_c) / (1.0 - eps_c))


def constants_for(delta: int, dims: int, eps_c: float, calibration=None):
    """(c_L, D_eff) for the grid-embedding estimator."""
    e = entry_for(delta, dims, calibration)
    return float(e["c_L"]), d_eff(float(e["D_raw"]), eps_c)


def fit_growth(xs, ys):
    """Least-squares (c, c') for ys ≈ c·xs + c'."""
    A = np.vstack([np.asarray(xs, float), np.ones(len(xs))]).T
    c, c0 = np.linalg.lstsq(A, np.asarray(ys, float), rcond=None)[0]
    return float(c), float(c0)


def loglog(delta: int) -> float:
    return math.log(math.log(delta))
