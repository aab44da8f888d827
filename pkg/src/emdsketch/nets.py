"""Nets and covers of EMD balls of sparse measures."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._kernels import ball_dist, insert_many
from .errors import ContractViolation
from .measure import (PROBABILITY, GranularitySpec, GridMeasure, check_granularity, emd_exact,
                      write_measure)
from .universe import SparseUniverse


def greedy_rnet(points, r: float):
    """Greedy r-net: scan in order, keep a point if it is farther than r from all kept ones."""
    if r <= 0:
        raise ContractViolation("r must be positive")
    kept: list = []
    for p in points:
        if all(emd_exact(p, q)[0] > r for q in kept):
            kept.append(p)
    return kept


class NetRegistry:
    """Lazily built nets N_0, N_1, ... over a finite universe.

    Level i holds points that are pairwise more than r_i apart; an expansion
    around (anchor, level) makes N_level an r_level-cover of the anchor's ball.
    Level 0 is the single root point.

    Expansions that go one level at a time (the search's access pattern) share
    one nested net: level i starts from the deepest level built so far and only
    adds points, so N_i is the set of points inserted at a level <= i.  ``mind``
    holds, per member, the distance to the nearest net point that was inserted
    with a threshold at least the current one; the test ``mind <= r`` therefore
    stays exact while thresholds shrink, and an anchor change costs nothing.
    ``mind``, ``tracked`` and ``ins`` (insertion level) are in the universe's
    slot order.  Expanding a level above the frontier falls back to an exact
    greedy build whose extra points belong to that level only.
    """

    NONE = np.iinfo(np.int32).max

    def __init__(self, universe: SparseUniverse, radii, root: int):
        self.U = universe
        self.radii = [float(r) for r in radii]
        self.root = int(root)
        self.expansions: list = []
        self._done: dict = {}
        M = len(universe)
        self.slot = universe.slot
        self.frontier = 0
        self.nested = {0}                       # levels that are prefixes of the chain
        self.extra: dict = {}                   # level -> points added by exact builds
        self.ins = np.full(M, self.NONE, np.int32)
        self.mind = np.full(M, np.inf)
        self.leafmax = np.full(len(universe.tree_index()[4]) if universe.k == 2 else 0, np.inf)
        self.tracked = np.zeros(M, bool)
        s0 = self.slot[self.root]
        self.ins[s0] = 0
        self.mind[s0] = 0.0
        self.inserted = 1
        self._cache = None          # (anchor, radius, members, distances, slots)

    @property
    def L(self) -> int:
        return len(self.radii) - 1

    def _chain_points(self, level: int) -> np.ndarray:
        if level not in self.nested:
            return np.zeros(0, np.int64)
        slots = np.flatnonzero(self.ins <= level)
        if self.U.k == 2:
            return np.sort(self.U.tree_index()[0][slots])
        return slots

    def level_points(self, i: int) -> list:
        pts = set(self._chain_points(i).tolist()) | set(self.extra.get(i, []))
        return sorted(pts)

    @property
    def levels(self) -> dict:
        built = sorted(self.nested | set(self.extra))
        return {i: self.level_points(i) for i in built}

    def _ball(self, anchor: int, radius: float, sel: np.ndarray) -> np.ndarray:
        """Members within radius of anchor whose slot is set in sel (canonical order)."""
        U = self.U
        if U.k != 2:
            return U.ball_select(anchor, radius, sel)
        c = self._cache
        if c is None or c[0] != anchor or c[1] < radius:
            J, d = ball_dist(anchor, radius, *U.tree_index())
            c = self._cache = (anchor, radius, J, d, self.slot[J])
        _, _, J, d, S = c
        return J[(d <= radius + 1e-12) & sel[S]]

    def _within(self, anchor: int, level: int, radius: float) -> list:
        U = self.U
        out = np.zeros(0, np.int64)
        if level in self.nested:
            if U.k == 2:
                out = self._ball(anchor, radius, self.ins <= level)
            else:
                pts = self._chain_points(level)
                out = pts[U.dist_member(anchor, pts) <= radius + 1e-12]
        ex = self.extra.get(level)
        if ex:
            ex = np.asarray(ex, np.int64)
            out = np.union1d(out, ex[U.dist_member(anchor, ex) <= radius + 1e-12])
        return out.tolist()

    def _insert(self, p: int, r: float, level: int):
        U = self.U
        sp = self.slot[p]
        self.ins[sp] = level
        self.mind[sp] = 0.0
        self.inserted += 1
        J = U.prefilter(U.mean[p], r)
        d = U.dist_member(p, J)
        keep = d <= r + 1e-12
        S = self.slot[J[keep]]
        self.mind[S] = np.minimum(self.mind[S], d[keep])

    def _track(self, anchor: int, radius: float, r: float):
        """Bring the untracked part of the ball under the running mind array."""
        U = self.U
        J = self._ball(anchor, radius, ~self.tracked)
        if len(J) == 0:
            return
        # only net points within radius + r of the anchor can cover the new members
        near = self._within(anchor, self.frontier, radius + r)
        for p in near:
            K = U.prefilter(U.mean[p], r, J)
            if len(K):
                d = U.dist_member(p, K)
                S = self.slot[K]
                self.mind[S] = np.minimum(self.mind[S], np.where(d <= r + 1e-12, d, np.inf))
        self.tracked[self.slot[J]] = True

    def expand(self, level: int, anchor: int, radius: float) -> list:
        if not 0 <= level <= self.L:
            raise ContractViolation(f"level {level} outside [0, {self.L}]")
        anchor = int(anchor)
        key = (anchor, level)
        if level == 0 or self._done.get(key, -1.0) >= radius:
            return self._within(anchor, level, radius)
        if level >= self.frontier:
            out = self._expand_nested(level, anchor, radius)
        else:
            self._expand_exact(level, anchor, radius)
            out = self._within(anchor, level, radius)
        self._done[key] = max(radius, self._done.get(key, -1.0))
        self.expansions.append((anchor, level, float(radius)))
        return out

    def _expand_nested(self, level: int, anchor: int, radius: float) -> list:
        U = self.U
        r = self.radii[level]
        self.frontier = level
        self.nested.add(level)
        self._track(anchor, radius, r)
        unc = self._ball(anchor, radius, self.tracked & (self.mind > r))
        if U.k == 2:
            new = insert_many(unc, r, U.min_gap, self.mind, self.leafmax, *U.tree_index())
            self.ins[self.slot[new]] = level
            self.inserted += len(new)
        else:
            for c in unc.tolist():
                if self.mind[self.slot[c]] > r:
                    self._insert(c, r, level)
        return self._within(anchor, level, radius)

    def _expand_exact(self, level: int, anchor: int, radius: float):
        U = self.U
        r = self.radii[level]
        pts = self.extra.setdefault(level, [])
        cand = U.ball(anchor, radius)
        mind = np.full(len(cand), np.inf)
        for p in self._within(anchor, level, radius + r):
            mind = np.minimum(mind, U.dist_member(p, cand))
        for i in range(len(cand)):
            if mind[i] > r:
                c = int(cand[i])
                pts.append(c)
                mind = np.minimum(mind, U.dist_member(c, cand))

    def separation_ok(self, level: int) -> bool:
        pts = self.level_points(level)
        r = self.radii[level]
        for i, p in enumerate(pts[:-1]):
            if np.any(self.U.dist_member(p, pts[i + 1:]) <= r):
                return False
        return True

    def dump(self, directory, levels=None):
        """One measure file per net point plus index.json."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        index = []
        built = sorted(self.nested | set(self.extra)) if levels is None else sorted(levels)
        for i in built:
            files = []
            for p in self.level_points(i):
                name = f"L{i:03d}_{p}.measure"
                write_measure(d / name, self.U.measure(p))
                files.append(name)
            index.append({"level": i, "r_i": self.radii[i], "points": files})
        (d / "index.json").write_text(json.dumps(index, indent=1))
        return d / "index.json"


def expand_registry(reg: NetRegistry, level: int, anchor, radius: float) -> list:
    """Net points of ``level`` within ``radius`` of ``anchor`` (a universe index or member)."""
    if isinstance(anchor, GridMeasure):
        a = reg.U.index_of(anchor)
        if a < 0:
            raise ContractViolation("anchor is not a member of the registry universe")
        anchor = a
    return reg.expand(level, anchor, radius)


# covers of EMD balls live in their own module
from .cover import BallCoverRequest, cover_ball, sample_in_ball, snap_to_granularity  # noqa: E402,F401
