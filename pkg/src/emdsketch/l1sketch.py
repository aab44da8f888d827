"""Cauchy sketches of ℓ1 vectors and the amplified EMD distance estimator."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .embed import (CDF_TAG, EmbeddedVector, GridShift, embed_cdf, embed_coarse, embed_grid,
                    grid_cell_keys, n_levels)
from .errors import ContractViolation
from .measure import GridMeasure, full_grid

SKETCH_VERSION = 1
MASK64 = (1 << 64) - 1
TABLE_LIMIT = 1 << 14   # grid points up to which per-point sketches are tabulated


def default_rows(eps_c: float) -> int:
    return int(math.ceil(400.0 / eps_c ** 2))


def default_reps(query_budget: int) -> int:
    return 2 * int(math.ceil(math.log2(max(2, query_budget)))) + 1


class CauchySketcher:
    """m x (virtual columns) matrix of standard Cauchy entries.

    Column ``key`` is drawn from a Philox stream keyed by (seed, key); row i is
    the i-th draw of that stream, so entries depend only on (seed, row, key)
    and the full matrix is never built.
    """

    def __init__(self, m: int, seed: int):
        if m < 1:
            raise ContractViolation("sketch needs m >= 1 rows")
        self.m = int(m)
        self.seed = int(seed) & MASK64
        self._cols: dict = {}

    def column(self, key: int) -> np.ndarray:
        key = int(key) & MASK64
        c = self._cols.get(key)
        if c is None:
            u = np.random.Generator(np.random.Philox(key=np.array([self.seed, key], dtype=np.uint64))).random(self.m)
            c = np.tan(np.pi * (u - 0.5))
            self._cols[key] = c
        return c

    def columns(self, keys) -> np.ndarray:
        """(len(keys), m) block."""
        keys = np.asarray(keys, dtype=np.int64).ravel()
        if len(keys) == 0:
            return np.zeros((0, self.m))
        return np.stack([self.column(k) for k in keys])


@dataclass(frozen=True)
class SketchVector:
    values: np.ndarray
    seed: int
    m: int

    def __sub__(self, other: "SketchVector") -> "SketchVector":
        if (self.seed, self.m) != (other.seed, other.m):
            raise ContractViolation("sketch provenance mismatch")
        return SketchVector(self.values - other.values, self.seed, self.m)


def sketch(v: EmbeddedVector, sk: CauchySketcher) -> SketchVector:
    vals = sk.columns(v.keys).T @ v.values if len(v.keys) else np.zeros(sk.m)
    return SketchVector(np.asarray(vals, float), sk.seed, sk.m)


def median_estimate(sv) -> float:
    vals = sv.values if isinstance(sv, SketchVector) else np.asarray(sv)
    if vals.size == 0:
        raise ContractViolation("median of an empty sketch")
    return float(np.median(np.abs(vals)))


@dataclass
class SketchParams:
    """Everything needed to rebuild the R pipelines of an amplified sketch."""
    delta: int
    dims: int
    R: int
    m: int
    seed: int
    eps_c: float = 0.1
    c_L: float = 1.0
    mode: str = "grid"          # grid | cdf | coarse
    t_param: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise ContractViolation("R must be >= 1")
        if self.mode not in ("grid", "cdf", "coarse"):
            raise ContractViolation(f"unknown sketch mode {self.mode!r}")
        if self.mode == "cdf" and self.dims != 1:
            raise ContractViolation("cdf mode needs dims = 1")
        if not 0 < self.eps_c < 1:
            raise ContractViolation("eps_c must lie in (0, 1)")

    def pipeline_seeds(self) -> list:
        return [seeding.child_seed(self.seed, seeding.SKETCH, p) for p in range(self.R)]

    def shifts(self) -> list:
        out = []
        for p in range(self.R):
            if self.mode == "cdf":
                out.append(GridShift((0,)))
            else:
                g = seeding.rng(self.seed, seeding.SKETCH, p, 1)
                out.append(GridShift(tuple(int(v) for v in g.integers(0, self.delta, self.dims))))
        return out


class AmplifiedSketch:
    """R independent (shift, Cauchy matrix) pipelines."""

    def __init__(self, params: SketchParams):
        self.params = params
        self.seeds = params.pipeline_seeds()
        self.shift_list = params.shifts()
        self.sketchers = [CauchySketcher(params.m, s) for s in self.seeds]
        self._table = None

    @property
    def R(self) -> int:
        return self.params.R

    def _check(self, x: GridMeasure):
        if x.delta != self.params.delta or x.dims != self.params.dims:
            raise ContractViolation("measure does not match the sketch grid")

    def embed(self, x: GridMeasure, p: int, minus: GridMeasure | None = None):
        if self.params.mode == "cdf":
            return embed_cdf(x, minus)
        if self.params.mode == "coarse":
            return embed_coarse(x, minus, self.params.t_param, shift=self.shift_list[p])
        return embed_grid(x, minus, self.shift_list[p])

    def apply(self, x: GridMeasure) -> "SketchedMeasure":
        """Linear measurements of x, one row block per pipeline."""
        self._check(x)
        if self.params.mode == "coarse":
            blocks = [self.embed(x, p) for p in range(self.R)]
            return SketchedMeasure(self.params, None, blocks, self)
        vals = np.stack([sketch(self.embed(x, p), self.sketchers[p]).values for p in range(self.R)])
        return SketchedMeasure(self.params, vals, None, self)

    # per-point table: row a of pipeline p is S_p(embedding of the unit mass at grid point a)
    def point_table(self) -> np.ndarray:
        """(n_points, R, m) sketches of every unit point mass (grid index order)."""
        if self._table is None:
            P = self.params
            if P.mode == "coarse":
                raise ContractViolation("no point table in coarse mode")
            pts = full_grid(P.delta, P.dims)
            T = np.empty((len(pts), P.R, P.m))
            for p in range(P.R):
                sk = self.sketchers[p]
                if P.mode == "cdf":
                    cols = sk.columns(CDF_TAG | np.arange(P.delta, dtype=np.int64))
                    T[:, p, :] = np.cumsum(cols[::-1], axis=0)[::-1]
                else:
                    keys = grid_cell_keys(pts, self.shift_list[p], P.delta)  # (L, n)
                    L = n_levels(P.delta)
                    uk, inv = np.unique(keys.ravel(), return_inverse=True)
                    cols = sk.columns(uk)
                    inv = inv.reshape(keys.shape)
                    acc = np.zeros((len(pts), P.m))
                    for t in range(L):
                        acc += (2.0 ** t) * cols[inv[t]]
                    T[:, p, :] = acc
            self._table = T
        return self._table


def grid_index(points, delta: int) -> np.ndarray:
    pts = np.asarray(points, np.int64)
    idx = pts[..., 0]
    for d in range(1, pts.shape[-1]):
        idx = idx * delta + pts[..., d]
    return idx


@dataclass
class SketchedMeasure:
    """Output of AmplifiedSketch.apply: the only view of x the recovery sees."""
    params: SketchParams
    values: np.ndarray | None      # (R, m)
    coarse: list | None = None
    _amp: AmplifiedSketch | None = field(default=None, repr=False)

    def pipelines(self) -> AmplifiedSketch:
        if self._amp is None:
            self._amp = AmplifiedSketch(self.params)
        return self._amp

    def raw_estimates(self, y: GridMeasure) -> np.ndarray:
        """Per-pipeline median estimates of ‖embed(x - y)‖₁, before normalisation."""
        amp = self.pipelines()
        amp._check(y)
        if self.params.mode == "coarse":
            out = []
            for p in range(self.params.R):
                ey = amp.embed(y, p)
                out.append(coarse_difference(self.coarse[p], ey).norm())
            return np.asarray(out)
        if self.params.delta ** self.params.dims <= TABLE_LIMIT:
            idx = grid_index(y.points, self.params.delta)
            return self.raw_estimates_many(idx[None], y.weights[None])[:, 0]
        ys = np.stack([sketch(amp.embed(y, p), amp.sketchers[p]).values for p in range(self.params.R)])
        return np.median(np.abs(self.values - ys), axis=1)

    def raw_estimates_many(self, idx: np.ndarray, w: np.ndarray) -> np.ndarray:
        """(R, B) raw estimates for B candidates given as grid indices (B, k) and weights (B, k)."""
        from ._kernels import sketch_medians
        T = self.pipelines().point_table()
        return sketch_medians(np.ascontiguousarray(self.values), T, np.ascontiguousarray(idx, dtype=np.int64),
                              np.ascontiguousarray(w, dtype=float))

    def scale(self) -> float:
        return 1.0 / ((1.0 - self.params.eps_c) * self.params.c_L)

    def estimate(self, y: GridMeasure) -> float:
        return float(np.median(self.raw_estimates(y))) * self.scale()

    def estimate_many(self, idx, w) -> np.ndarray:
        return np.median(self.raw_estimates_many(idx, w), axis=0) * self.scale()

    # serialisation
    def to_json(self) -> str:
        if self.params.mode == "coarse":
            raise ContractViolation("coarse-mode sketches are in-memory only")
        P = self.params
        amp = self.pipelines()
        doc = {"version": SKETCH_VERSION, "delta": P.delta, "dims": P.dims, "R": P.R, "m": P.m,
               "seeds": [str(s) for s in amp.seeds], "shift": [list(s.s) for s in amp.shift_list],
               "values": [[repr(float(v)) for v in row] for row in self.values],
               "root_seed": str(P.seed), "eps_c": P.eps_c, "c_L": P.c_L, "mode": P.mode,
               "t_param": P.t_param}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SketchedMeasure":
        doc = json.loads(text)
        if doc.get("version") != SKETCH_VERSION:
            raise ContractViolation(f"unsupported sketch version {doc.get('version')}")
        P = SketchParams(int(doc["delta"]), int(doc["dims"]), int(doc["R"]), int(doc["m"]),
                         int(doc["root_seed"]), float(doc["eps_c"]), float(doc["c_L"]),
                         doc["mode"], int(doc["t_param"]))
        sm = cls(P, np.array([[float(v) for v in row] for row in doc["values"]]))
        amp = sm.pipelines()
        if [str(s) for s in amp.seeds] != doc["seeds"] or [list(s.s) for s in amp.shift_list] != doc["shift"]:
            raise ContractViolation("stored seeds or shifts do not match the root seed")
        return sm


def coarse_difference(a, b):
    """Blockwise a - b of two CoarseEmbeddings over the same hierarchy."""
    from .embed import CoarseEmbedding
    if a.shift != b.shift or a.sides != b.sides:
        raise ContractViolation("coarse embeddings use different hierarchies")
    blocks = []
    for la, lb in zip(a.blocks, b.blocks):
        level: dict = {}
        for parent in set(la) | set(lb):
            ca, cb = la.get(parent, {}), lb.get(parent, {})
            cells = {c: ca.get(c, 0.0) - cb.get(c, 0.0) for c in set(ca) | set(cb)}
            cells = {c: v for c, v in cells.items() if v != 0.0}
            if cells:
                level[parent] = cells
        blocks.append(level)
    return CoarseEmbedding(a.delta, a.dims, a.t_param, a.shift, a.sides, blocks)


def estimate_distance(x_sketch: SketchedMeasure, y: GridMeasure, params: SketchParams | None = None) -> float:
    """Median over pipelines of median_estimate(S(x - y)) / ((1 - eps_c)·c_L)."""
    if params is not None and params != x_sketch.params:
        raise ContractViolation("pipeline parameters differ from the stored sketch")
    return x_sketch.estimate(y)


def save_sketch(path, sm: SketchedMeasure):
    Path(path).write_text(sm.to_json())


def load_sketch(path) -> SketchedMeasure:
    return SketchedMeasure.from_json(Path(path).read_text())
