"""Linear embeddings of measure differences into sparse ℓ1 vectors.

* ``embed_grid``: shifted quadtree (cell masses at dyadic levels, level t weighted by 2^t)
* ``embed_cdf``: prefix sums, an isometry for 1D probability measures
* ``embed_coarse``: nested grids refined by 2^t per step, normed as an ℓ1-sum of
  small EMD instances
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .errors import ContractViolation
from .measure import GENERAL, GridMeasure, emd_exact

# column keys for the sketch generator: level in the top byte, cells below
_LEVEL_SHIFT = 48
_CX_SHIFT = 24
_CELL_MASK = (1 << 24) - 1
CDF_TAG = 1 << 62


def pad_pow2(delta: int) -> int:
    return 1 << max(0, math.ceil(math.log2(delta))) if delta > 1 else 1


def n_levels(delta: int) -> int:
    """l + 1 where the padded side is 2^l."""
    return int(math.log2(pad_pow2(delta))) + 1


@dataclass(frozen=True)
class GridShift:
    s: tuple

    def __post_init__(self):
        if any(c < 0 for c in self.s):
            raise ContractViolation("shift components must be nonnegative")

    def check(self, delta: int):
        if any(c >= delta for c in self.s):
            raise ContractViolation(f"shift {self.s} outside [0, {delta})")


def sample_shift(delta: int, seed: int, dims: int = 2) -> GridShift:
    g = seeding.rng(seed, seeding.EMBED, 0)
    return GridShift(tuple(int(v) for v in g.integers(0, delta, size=dims)))


def encode_keys(t, cells) -> np.ndarray:
    """Pack (level, cx[, cy]) into int64 column keys."""
    cells = np.asarray(cells, dtype=np.int64)
    key = np.asarray(t, dtype=np.int64) << _LEVEL_SHIFT
    key = key + (cells[..., 0] << _CX_SHIFT)
    if cells.shape[-1] > 1:
        key = key + cells[..., 1]
    return key


def decode_key(key: int, dims: int = 2) -> tuple:
    key = int(key)
    if key & CDF_TAG:
        return ("cdf", key & ~CDF_TAG)
    t = key >> _LEVEL_SHIFT
    cx = (key >> _CX_SHIFT) & _CELL_MASK
    cy = key & _CELL_MASK
    return (t, cx, cy) if dims == 2 else (t, cx)


@dataclass(frozen=True)
class EmbeddedVector:
    """Sparse vector: sorted int64 keys with real values."""
    keys: np.ndarray
    values: np.ndarray
    level_count: int
    dims: int = 2

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def entries(self) -> dict:
        return {decode_key(k, self.dims): float(v) for k, v in zip(self.keys, self.values)}

    def _combine(self, other: "EmbeddedVector", sign: float) -> "EmbeddedVector":
        keys = np.concatenate([self.keys, other.keys])
        vals = np.concatenate([self.values, sign * other.values])
        uk, inv = np.unique(keys, return_inverse=True)
        out = np.bincount(inv, weights=vals, minlength=len(uk))
        keep = out != 0.0
        return EmbeddedVector(uk[keep], out[keep], max(self.level_count, other.level_count), self.dims)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __mul__(self, c: float):
        return EmbeddedVector(self.keys, self.values * c, self.level_count, self.dims)

    __rmul__ = __mul__


def _signed_atoms(x: GridMeasure, minus: GridMeasure | None):
    if minus is None:
        return x.points, x.weights
    if minus.delta != x.delta or minus.dims != x.dims:
        raise ContractViolation("measure mismatch")
    return np.vstack([x.points, minus.points]), np.concatenate([x.weights, -minus.weights])


def grid_cell_keys(points, shift: GridShift, delta: int) -> np.ndarray:
    """(levels, n) keys of the cells holding each point."""
    L = n_levels(delta)
    sp = np.asarray(points, np.int64) + np.asarray(shift.s, np.int64)
    t = np.arange(L, dtype=np.int64)
    cells = sp[None, :, :] >> t[:, None, None]
    return encode_keys(t[:, None], cells)


def embed_grid(x: GridMeasure, minus: GridMeasure | None = None,
               shift: GridShift | None = None) -> EmbeddedVector:
    """G_s(x - minus): level t holds 2^t times the net mass of each side-2^t cell."""
    shift = shift or GridShift((0,) * x.dims)
    shift.check(x.delta)
    if len(shift.s) != x.dims:
        raise ContractViolation("shift dimension differs from measure")
    if minus is not None:
        # embed each side on its own so equal inputs cancel exactly
        _signed_atoms(x, minus)
        return embed_grid(x, None, shift) - embed_grid(minus, None, shift)
    pts, w = x.points, x.weights
    L = n_levels(x.delta)
    if len(w) == 0:
        return EmbeddedVector(np.zeros(0, np.int64), np.zeros(0), L, x.dims)
    keys = grid_cell_keys(pts, shift, x.delta)
    vals = (2.0 ** np.arange(L))[:, None] * w[None, :]
    uk, inv = np.unique(keys.ravel(), return_inverse=True)
    out = np.bincount(inv, weights=vals.ravel(), minlength=len(uk))
    keep = out != 0.0
    return EmbeddedVector(uk[keep], out[keep], L, x.dims)


def embed_cdf(x: GridMeasure, minus: GridMeasure | None = None) -> EmbeddedVector:
    """Dense prefix-sum vector of length Δ."""
    if x.dims != 1:
        raise ContractViolation("embed_cdf needs dims = 1")
    pts, w = _signed_atoms(x, minus)
    dens = np.zeros(x.delta)
    np.add.at(dens, pts[:, 0], w)
    keys = CDF_TAG | np.arange(x.delta, dtype=np.int64)
    return EmbeddedVector(keys, np.cumsum(dens), 1, 1)


# coarse hierarchy

def coarse_sides(delta: int, t_param: int) -> list:
    """Side lengths Δ/2^t, Δ/2^{2t}, ..., 1 of the nested grids (Δ padded)."""
    D = pad_pow2(delta)
    l = int(math.log2(D))
    sides = []
    e = t_param
    while True:
        sides.append(1 << max(0, l - e))
        if l - e <= 0:
            break
        e += t_param
    return sides


@dataclass
class CoarseEmbedding:
    """Nested-grid decomposition of a signed measure.

    ``blocks[j]`` maps a parent cell (level j-1, the whole domain for j = 0) to
    {sub-cell offset: net mass}.  The norm sums, over every block, the side
    length of level j times the general EMD between the positive and negative
    parts of the block, measured on the block's own small grid.
    """
    delta: int
    dims: int
    t_param: int
    shift: GridShift
    sides: list
    blocks: list = field(default_factory=list)

    def block_grid(self, j: int) -> int:
        parent = 2 * pad_pow2(self.delta) if j == 0 else self.sides[j - 1]
        return max(1, -(-parent // self.sides[j]))

    def norm(self) -> float:
        total = 0.0
        for j, level in enumerate(self.blocks):
            g = self.block_grid(j)
            for parent in sorted(level):
                cells = level[parent]
                pos = {c: v for c, v in cells.items() if v > 0}
                neg = {c: -v for c, v in cells.items() if v < 0}
                if not pos and not neg:
                    continue
                a = GridMeasure.from_atoms(g, self.dims, pos, GENERAL)
                b = GridMeasure.from_atoms(g, self.dims, neg, GENERAL)
                total += self.sides[j] * emd_exact(a, b)[0]
        return total

    def mass_vector(self, j: int) -> dict:
        return {(p, c): v for p, cells in self.blocks[j].items() for c, v in cells.items()}


def embed_coarse(x: GridMeasure, minus: GridMeasure | None = None, t_param: int = 1,
                 seed: int = 0, shift: GridShift | None = None) -> CoarseEmbedding:
    l = int(math.log2(pad_pow2(x.delta)))
    if not 1 <= t_param <= max(1, l):
        raise ContractViolation(f"t_param must lie in [1, {max(1, l)}]")
    shift = shift or sample_shift(x.delta, seed, x.dims)
    shift.check(x.delta)
    sides = coarse_sides(x.delta, t_param)
    pts, w = _signed_atoms(x, minus)
    sp = pts + np.asarray(shift.s, np.int64)
    blocks = []
    for j, side in enumerate(sides):
        level: dict = {}
        sums: dict = {}
        for p, v in zip(sp, w):
            cell = tuple(int(c) // side for c in p)
            if j == 0:
                parent, off = (), cell
            else:
                ps = sides[j - 1]
                parent = tuple(int(c) // ps for c in p)
                r = ps // side
                off = tuple(c - q * r for c, q in zip(cell, parent))
            acc = sums.setdefault((parent, off), [0.0, 0.0])
            acc[0 if v > 0 else 1] += abs(float(v))
        for (parent, off), (a, b) in sums.items():
            if a != b:
                level.setdefault(parent, {})[off] = a - b
        blocks.append(level)
    return CoarseEmbedding(x.delta, x.dims, t_param, shift, sides, blocks)
