"""Packing families of weighted point sets: all at EMD k/2 (k/4 in the plane) from one anchor set.

Anchors sit at 0-based positions 2(i-1)Δ/k so the whole family fits in [0, Δ);
each index i_j in [0, log U] splits an anchor's mass 2 into 2 - 2^-i_j at the
anchor and 2^-i_j at distance 2^i_j, which always costs exactly 1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .measure import GENERAL, PROBABILITY, GridMeasure, emd_exact


def _pow2(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class PackingFamily:
    k: int
    delta: int
    dims: int
    anchors: tuple          # anchor points, one per pair
    U: int

    @property
    def log_U(self) -> int:
        return int(round(math.log2(self.U)))

    @property
    def slots(self) -> int:
        return len(self.anchors)

    @property
    def cardinality(self) -> int:
        return (self.log_U + 1) ** self.slots

    @property
    def certificate_value(self) -> float:
        return float(self.slots)

    @property
    def A(self) -> GridMeasure:
        return GridMeasure(self.delta, self.dims, list(self.anchors), [2.0] * self.slots, GENERAL)

    def B(self, I) -> GridMeasure:
        I = tuple(int(i) for i in I)
        if len(I) != self.slots or min(I) < 0 or max(I) > self.log_U:
            raise ContractViolation(f"index tuple must have {self.slots} entries in [0, {self.log_U}]")
        atoms = {}
        for a, i in zip(self.anchors, I):
            far = (a[0] + 2 ** i,) + tuple(a[1:])
            atoms[a] = 2.0 - 2.0 ** -i
            atoms[far] = 2.0 ** -i
        return GridMeasure.from_atoms(self.delta, self.dims, atoms, GENERAL)

    def sample(self, n: int, g: np.random.Generator) -> list:
        return [tuple(int(v) for v in g.integers(0, self.log_U + 1, self.slots)) for _ in range(n)]

    def all_indices(self):
        return itertools.product(range(self.log_U + 1), repeat=self.slots)

    def row_of(self, p) -> int:
        return int(p[1]) if self.dims == 2 else 0


def gen_packing_1d(k: int, delta: int) -> PackingFamily:
    if k <= 1 or k % 2 or k > delta or not _pow2(delta):
        raise ContractViolation("need k even, 1 < k <= delta and delta a power of two")
    step = 2 * delta // k
    anchors = tuple((j * step,) for j in range(k // 2))
    U = delta // k
    if not _pow2(U):
        raise ContractViolation("delta / k must be a power of two")
    return PackingFamily(k, delta, 1, anchors, U)


def gen_packing_2d(k: int, delta: int) -> PackingFamily:
    """k/4 anchors along a line of length Δ·sqrt(k)/2 folded into sqrt(k)/2 rows 2Δ/sqrt(k) apart."""
    s = math.isqrt(k)
    if k <= 1 or s * s != k or s % 2 or not _pow2(delta):
        raise ContractViolation("need k = (2s)^2 and delta a power of two")
    step = 2 * delta // s
    per_row = s // 2
    if step * s // 2 != delta or delta // s < 1:
        raise ContractViolation("delta too small for k")
    anchors = tuple((c * step, r * step) for r in range(per_row) for c in range(per_row))
    U = delta // s
    if not _pow2(U):
        raise ContractViolation("delta / sqrt(k) must be a power of two")
    return PackingFamily(k, delta, 2, anchors, U)


def emd_weighted(a: GridMeasure, b: GridMeasure) -> float:
    """EMD of equal-mass weighted sets via the probability-scale problem, scaled back."""
    ma, mb = a.total_mass, b.total_mass
    if abs(ma - mb) > 1e-9 * max(1.0, ma):
        raise ContractViolation("weighted sets must carry equal mass")
    pa = GridMeasure(a.delta, a.dims, a.points, a.weights / ma, PROBABILITY, validate=False)
    pb = GridMeasure(b.delta, b.dims, b.points, b.weights / mb, PROBABILITY, validate=False)
    return ma * emd_exact(pa, pb)[0]


def certificate(fam: PackingFamily, I) -> float:
    return emd_weighted(fam.A, fam.B(I))


@dataclass
class ProbeReport:
    delta: int
    k: int
    sampled: int
    distinct: int
    in_ball: int
    separated: int
    r_big: float
    r_small: float

    @property
    def log2_size(self) -> float:
        return math.log2(max(1, self.separated))


def doubling_probe(fam: PackingFamily, r_big: float | None = None, r_small: float | None = None,
                   samples: int = 200, g: np.random.Generator | None = None, indices=None) -> ProbeReport:
    """Greedy r_small-separated subset of sampled B_I inside B(A, r_big).

    Defaults follow the covering argument: r_big = k/2, r_small = k/200."""
    r_big = fam.k / 2 if r_big is None else r_big
    r_small = fam.k / 200 if r_small is None else r_small
    if indices is None:
        g = g if g is not None else np.random.default_rng(0)
        indices = fam.sample(samples, g)
    indices = list(indices)
    distinct = sorted(set(tuple(I) for I in indices))
    inside = [I for I in distinct if certificate(fam, I) <= r_big + 1e-9]
    kept: list = []
    for I in inside:
        b = fam.B(I)
        if all(emd_weighted(b, c) > r_small for c in kept):
            kept.append(b)
    return ProbeReport(fam.delta, fam.k, len(indices), len(distinct), len(inside), len(kept), r_big, r_small)
