"""Finite universe of k-sparse probability measures with weights in (1/N)Z.

Members are stored as padded arrays (grid index, weight) and kept in canonical
order, i.e. sorted by (points, weights) exactly like ``GridMeasure.canonical_key``,
so "smallest index" is the deterministic tie-break used by the search.

Distances are exact EMD.  For k <= 2 they are vectorised closed forms: between
two measures with at most two atoms each the transport polytope is a segment
and the cost is linear along it, so the optimum sits at one of its ends; from a
general measure to a two-atom measure the optimal plan fills the first target
with the source atoms of smallest cost difference (a fractional knapsack).
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ContractViolation
from .measure import PROBABILITY, GridMeasure, emd_exact


def _compositions(N: int, s: int):
    """Ordered tuples of s positive integers summing to N."""
    for cuts in itertools.combinations(range(1, N), s - 1):
        b = (0,) + cuts + (N,)
        yield tuple(b[i + 1] - b[i] for i in range(s))


class SparseUniverse:
    def __init__(self, delta: int, dims: int, k: int, N: int):
        if k < 1 or N < 1:
            raise ContractViolation("need k >= 1 and N >= 1")
        self.delta, self.dims, self.k, self.N = int(delta), int(dims), int(k), int(N)
        G = delta ** dims
        self.G = G
        if G > 4096 and k > 1:
            raise ContractViolation("universe too large for exhaustive enumeration")
        rows_i, rows_u = [], []
        for s in range(1, min(k, N, G) + 1):
            comps = np.array(list(_compositions(N, s)), dtype=np.int64)
            combos = np.array(list(itertools.combinations(range(G), s)), dtype=np.int64)
            ii = np.repeat(combos, len(comps), axis=0)
            uu = np.tile(comps, (len(combos), 1))
            pad_i = np.full((len(ii), k - s), -1, np.int64)
            pad_u = np.zeros((len(ii), k - s), np.int64)
            rows_i.append(np.hstack([ii, pad_i]))
            rows_u.append(np.hstack([uu, pad_u]))
        idx = np.vstack(rows_i)
        units = np.vstack(rows_u)
        code = np.zeros(len(idx), dtype=np.int64)
        for c in range(k):
            code = code * (G + 1) + (idx[:, c] + 1)
        for c in range(k):
            code = code * (N + 1) + units[:, c]
        order = np.argsort(code, kind="stable")
        self.code = code[order]
        idx, units = idx[order], units[order]
        self.support = (idx >= 0).sum(axis=1)
        # padded slots repeat the first atom with zero weight
        self.idx = np.where(idx >= 0, idx, idx[:, :1])
        self.units = units
        self.w = units / float(N)
        self.coords = self._coords(self.idx)                       # (M, k, dims)
        self.mean = np.einsum("mk,mkd->md", self.w, self.coords)   # 1-Lipschitz features
        self._by_mx = np.argsort(self.mean[:, 0], kind="stable")
        self._mx_sorted = self.mean[self._by_mx, 0]
        self._ordered = None
        # distinct members are at least 1/N apart: optimal plans move whole 1/N units
        self.min_gap = 1.0 / self.N

    def features(self) -> np.ndarray:
        """1-Lipschitz features (w.r.t. EMD): the mean, E|X_t - c| at three cut points per
        axis and, in 2D, E|X + Y - c| and E|X - Y - c| at three cut points each."""
        D = self.delta
        cols = [self.mean]
        for c in (D / 4 - 0.5, D / 2 - 0.5, 3 * D / 4 - 0.5):
            cols.append(np.einsum("mk,mkd->md", self.w, np.abs(self.coords - c)))
        if self.dims == 2:
            s = self.coords[:, :, 0] + self.coords[:, :, 1]
            t = self.coords[:, :, 0] - self.coords[:, :, 1]
            for c in (D / 2 - 1, D - 1, 3 * D / 2 - 1):
                cols.append((self.w * np.abs(s - c)).sum(axis=1)[:, None])
            for c in (-D / 2, 0.0, D / 2):
                cols.append((self.w * np.abs(t - c)).sum(axis=1)[:, None])
        return np.hstack(cols)

    def tree_index(self, leaf: int = 16):
        """Static kd-tree over the Lipschitz features, used by the compiled net loops.

        Returns (perm, pos, start, end, left, right, lo, hi, coords, first weights,
        features) with per-member arrays permuted into tree order."""
        if self._ordered is None:
            from ._kernels import build_tree
            F = np.ascontiguousarray(self.features())
            perm, start, end, left, right, lo, hi = build_tree(F, leaf)
            pos = np.empty(len(perm), np.int64)
            pos[perm] = np.arange(len(perm))
            self._ordered = (perm, pos, start, end, left, right, lo, hi,
                             np.ascontiguousarray(self.coords[perm]),
                             np.ascontiguousarray(self.w[perm, 0]), np.ascontiguousarray(F[perm]))
        return self._ordered

    def _coords(self, gidx):
        gidx = np.asarray(gidx, np.int64)
        if self.dims == 1:
            return gidx[..., None].astype(float)
        return np.stack([gidx // self.delta, gidx % self.delta], axis=-1).astype(float)

    def __len__(self):
        return len(self.code)

    def measure(self, i: int) -> GridMeasure:
        i = int(i)
        s = int(self.support[i])
        pts = self.coords[i, :s].astype(np.int64)
        return GridMeasure(self.delta, self.dims, pts, self.w[i, :s], PROBABILITY)

    def index_of(self, x: GridMeasure) -> int:
        """Universe index of x, or -1 if x is not a member."""
        if x.delta != self.delta or x.dims != self.dims or x.support_size > self.k:
            return -1
        u = x.weights * self.N
        if np.any(np.abs(u - np.round(u)) > 1e-9):
            return -1
        g = x.points[:, 0] if self.dims == 1 else x.points[:, 0] * self.delta + x.points[:, 1]
        s = x.support_size
        syms = list(g + 1) + [0] * (self.k - s)
        uu = list(np.round(u).astype(np.int64)) + [0] * (self.k - s)
        code = 0
        for c in syms:
            code = code * (self.G + 1) + int(c)
        for c in uu:
            code = code * (self.N + 1) + int(c)
        j = int(np.searchsorted(self.code, code))
        return j if j < len(self.code) and self.code[j] == code else -1

    # candidate pruning by the mean feature (|E_a[x] - E_b[x]| <= EMD(a, b))
    def prefilter(self, mean, r: float, J=None) -> np.ndarray:
        mean = np.asarray(mean, float)
        if J is None:
            lo = np.searchsorted(self._mx_sorted, mean[0] - r - 1e-12, "left")
            hi = np.searchsorted(self._mx_sorted, mean[0] + r + 1e-12, "right")
            J = np.sort(self._by_mx[lo:hi])
        else:
            J = np.asarray(J)
        keep = np.all(np.abs(self.mean[J] - mean) <= r + 1e-12, axis=1)
        return J[keep]

    # exact distances
    def dist_member(self, i: int, J=None) -> np.ndarray:
        J = np.arange(len(self)) if J is None else np.asarray(J)
        if self.k == 1:
            return np.abs(self.coords[J, 0] - self.coords[i, 0]).sum(axis=1)
        if self.k == 2:
            return _emd_2x2(self.coords[i], self.w[i], self.coords[J], self.w[J])
        a = self.measure(i)
        return np.array([emd_exact(a, self.measure(j))[0] for j in J])

    def dist_measure(self, x: GridMeasure, J=None) -> np.ndarray:
        """EMD from an arbitrary probability measure x to members J."""
        J = np.arange(len(self)) if J is None else np.asarray(J)
        if x.delta != self.delta or x.dims != self.dims:
            raise ContractViolation("measure does not live on this universe's grid")
        P = x.points.astype(float)
        if self.k == 1:
            d = np.abs(P[None, :, :] - self.coords[J, 0][:, None, :]).sum(axis=2)
            return d @ x.weights
        if self.k == 2:
            return _emd_many_to_2(P, x.weights, self.coords[J], self.w[J])
        return np.array([emd_exact(x, self.measure(j))[0] for j in J])

    @property
    def slot(self) -> np.ndarray:
        """Storage position of each member (tree order for k = 2, identity otherwise)."""
        if self.k == 2:
            return self.tree_index()[1]
        return np.arange(len(self))

    def ball_select(self, center: int, r: float, sel: np.ndarray) -> np.ndarray:
        """Members within r of member ``center`` whose slot is set in ``sel``, in canonical order."""
        if self.k == 2:
            from ._kernels import ball_select
            return ball_select(int(center), float(r), sel, *self.tree_index())
        J = self.prefilter(self.mean[center], r)
        J = J[sel[J]]
        return J[self.dist_member(int(center), J) <= r + 1e-12]

    def ball(self, center, r: float, J=None) -> np.ndarray:
        """Members within EMD r of a member index or of a measure, in canonical order."""
        if isinstance(center, GridMeasure):
            mean = (center.weights[:, None] * center.points).sum(axis=0)
            J = self.prefilter(mean, r, J)
            d = self.dist_measure(center, J)
        else:
            J = self.prefilter(self.mean[center], r, J)
            d = self.dist_member(int(center), J)
        return J[d <= r + 1e-12]


def _emd_2x2(ca, wa, CB, WB):
    """EMD between one two-atom measure (ca (2,d), wa (2,)) and many (CB (B,2,d), WB (B,2))."""
    d = np.abs(ca[None, :, None, :] - CB[:, None, :, :]).sum(axis=3)   # (B, 2, 2)
    u = wa[0]
    v = WB[:, 0]
    lo = np.maximum(0.0, u + v - 1.0)
    hi = np.minimum(u, v)

    def cost(t):
        return (t * d[:, 0, 0] + (u - t) * d[:, 0, 1] + (v - t) * d[:, 1, 0]
                + (1.0 - u - v + t) * d[:, 1, 1])

    out = np.minimum(cost(lo), cost(hi))
    return np.maximum(out, 0.0)


def _emd_many_to_2(P, xw, CB, WB):
    """EMD from x (atoms P (n,d), weights xw) to many two-atom measures."""
    d1 = np.abs(P[None, :, :] - CB[:, None, 0, :]).sum(axis=2)   # (B, n)
    d2 = np.abs(P[None, :, :] - CB[:, None, 1, :]).sum(axis=2)
    base = d2 @ xw
    diff = d1 - d2
    order = np.argsort(diff, axis=1, kind="stable")
    ds = np.take_along_axis(diff, order, axis=1)
    ws = xw[order]
    cum = np.cumsum(ws, axis=1)
    v = WB[:, 0][:, None]
    fill = np.clip(v - (cum - ws), 0.0, ws)
    return np.maximum(base + (fill * ds).sum(axis=1), 0.0)
