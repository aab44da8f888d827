"""Measures on [Δ]^d, exact EMD and brute-force k-median."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._transport import solve_transport
from .errors import ContractViolation

MASS_TOL = 1e-9
PROBABILITY = "probability"
GENERAL = "general"


def _fmt(w: float) -> str:
    return repr(float(w))


class GridMeasure:
    """Finite nonnegative measure on the grid [Δ]^d, d in {1, 2}.

    Atoms are kept sorted lexicographically by point, so two equal measures have
    identical arrays.  Treat instances as immutable.
    """

    __slots__ = ("delta", "dims", "kind", "points", "weights", "_hash")

    def __init__(self, delta: int, dims: int, points, weights, kind: str = PROBABILITY,
                 validate: bool = True):
        pts = np.asarray(points, dtype=np.int64).reshape(-1, dims) if len(points) else np.zeros((0, dims), np.int64)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise ContractViolation("points and weights differ in length")
        if len(pts) > 1:
            order = np.lexsort(pts.T[::-1])
            pts, w = pts[order], w[order]
        self.delta = int(delta)
        self.dims = int(dims)
        self.kind = kind
        self.points = pts
        self.weights = w
        self._hash = None
        if validate:
            self._validate()
        pts.setflags(write=False)
        w.setflags(write=False)

    def _validate(self):
        if self.dims not in (1, 2):
            raise ContractViolation(f"dims must be 1 or 2, got {self.dims}")
        if self.delta < 1:
            raise ContractViolation("delta must be positive")
        if self.kind not in (PROBABILITY, GENERAL):
            raise ContractViolation(f"unknown kind {self.kind!r}")
        if len(self.points):
            if self.points.min() < 0 or self.points.max() >= self.delta:
                raise ContractViolation("coordinate outside [0, delta)")
            if len(self.points) > 1 and (np.diff(self.points, axis=0) == 0).all(axis=1).any():
                raise ContractViolation("duplicate point")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ContractViolation("weights must be finite and strictly positive")
        if self.kind == PROBABILITY and abs(self.total_mass - 1.0) > MASS_TOL:
            raise ContractViolation(f"probability measure has mass {self.total_mass}")

    # construction helpers
    @classmethod
    def from_atoms(cls, delta: int, dims: int, atoms, kind: str = PROBABILITY):
        """Build from a mapping or iterable of (point, weight); merges repeats, drops zeros."""
        items = atoms.items() if hasattr(atoms, "items") else atoms
        acc: dict = {}
        for p, w in items:
            key = (int(p),) if np.ndim(p) == 0 else tuple(int(c) for c in p)
            acc[key] = acc.get(key, 0.0) + float(w)
        acc = {p: w for p, w in acc.items() if w != 0.0}
        pts = list(acc.keys())
        return cls(delta, dims, pts, [acc[p] for p in pts], kind)

    @classmethod
    def point_mass(cls, delta: int, point, dims: int | None = None, weight: float = 1.0):
        point = (int(point),) if np.ndim(point) == 0 else tuple(int(c) for c in point)
        dims = dims or len(point)
        kind = PROBABILITY if weight == 1.0 else GENERAL
        return cls(delta, dims, [point], [weight], kind)

    @property
    def total_mass(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def support_size(self) -> int:
        return len(self.weights)

    def atoms(self) -> dict:
        return {tuple(int(c) for c in p): float(w) for p, w in zip(self.points, self.weights)}

    def canonical_key(self) -> tuple:
        """Sorted-atom encoding used for hashing and deterministic tie-breaks."""
        return (self.delta, self.dims,
                tuple(tuple(int(c) for c in p) for p in self.points),
                tuple(float(w) for w in self.weights))

    def scaled(self, c: float) -> "GridMeasure":
        return GridMeasure(self.delta, self.dims, self.points, self.weights * c, GENERAL)

    def as_kind(self, kind: str) -> "GridMeasure":
        return GridMeasure(self.delta, self.dims, self.points, self.weights, kind)

    def __eq__(self, other):
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return (self.delta == other.delta and self.dims == other.dims
                and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.canonical_key())
        return self._hash

    def __repr__(self):
        atoms = ", ".join(f"{tuple(int(c) for c in p)}: {w:.6g}" for p, w in zip(self.points, self.weights))
        return f"GridMeasure(delta={self.delta}, dims={self.dims}, {{{atoms}}})"


@dataclass(frozen=True)
class GranularitySpec:
    N: int

    def __post_init__(self):
        if int(self.N) < 1:
            raise ContractViolation("granularity denominator must be >= 1")


@dataclass(frozen=True)
class TransportPlan:
    """Flow between two measures.

    ``edges`` holds the mass that actually moves (source != target); mass that
    stays in place is listed in ``retained`` and costs nothing.  The slack
    masses are the unmatched parts charged at D = d·Δ per unit.
    """
    edges: tuple
    retained: tuple
    slack_source_mass: float
    slack_target_mass: float
    D: float

    @property
    def cost(self) -> float:
        moved = math.fsum(w * sum(abs(a - b) for a, b in zip(p, q)) for p, q, w in self.edges)
        return moved + self.D * (self.slack_source_mass + self.slack_target_mass)

    def outflow(self) -> dict:
        out: dict = {}
        for p, _, w in self.edges:
            out[p] = out.get(p, 0.0) + w
        for p, w in self.retained:
            out[p] = out.get(p, 0.0) + w
        return out

    def inflow(self) -> dict:
        inn: dict = {}
        for _, q, w in self.edges:
            inn[q] = inn.get(q, 0.0) + w
        for p, w in self.retained:
            inn[p] = inn.get(p, 0.0) + w
        return inn


def diameter_penalty(delta: int, dims: int) -> float:
    return float(dims * delta)


def _check_pair(a: GridMeasure, b: GridMeasure):
    if a.delta != b.delta or a.dims != b.dims:
        raise ContractViolation(f"measure mismatch: delta {a.delta}/{b.delta}, dims {a.dims}/{b.dims}")


def l1_cost_matrix(P, Q) -> np.ndarray:
    P = np.asarray(P)
    Q = np.asarray(Q)
    P = P.reshape(len(P), -1) if P.ndim < 2 else P
    Q = Q.reshape(len(Q), -1) if Q.ndim < 2 else Q
    return np.abs(P[:, None, :] - Q[None, :, :]).sum(axis=2).astype(float)


def emd_exact(a: GridMeasure, b: GridMeasure):
    """Exact EMD with ℓ1 ground cost; leftover mass on either side costs D = d·Δ.

    Solved as one balanced transportation problem: a slack source carrying b's
    total mass and a slack sink carrying a's total mass, joined to real nodes at
    cost D and to each other at cost 0.  Returns (cost, TransportPlan).
    """
    _check_pair(a, b)
    D = diameter_penalty(a.delta, a.dims)
    n, m = a.support_size, b.support_size
    if n == 0 and m == 0:
        return 0.0, TransportPlan((), (), 0.0, 0.0, D)
    ta, tb = a.total_mass, b.total_mass
    C = np.zeros((n + 1, m + 1))
    C[:n, :m] = l1_cost_matrix(a.points, b.points)
    C[:n, m] = D
    C[n, :m] = D
    supply = np.append(a.weights, tb)
    demand = np.append(b.weights, ta)
    flow = solve_transport(supply, demand, C)
    tol = 1e-13 * max(1.0, ta + tb)
    edges, retained = [], []
    ap = [tuple(int(c) for c in p) for p in a.points]
    bp = [tuple(int(c) for c in p) for p in b.points]
    for i, j in zip(*np.nonzero(flow[:n, :m] > tol)):
        w = float(flow[i, j])
        if ap[i] == bp[j]:
            retained.append((ap[i], w))
        else:
            edges.append((ap[i], bp[j], w))
    slack_s = float(flow[:n, m][flow[:n, m] > tol].sum())
    slack_t = float(flow[n, :m][flow[n, :m] > tol].sum())
    plan = TransportPlan(tuple(edges), tuple(retained), slack_s, slack_t, D)
    return plan.cost, plan


def emd(a: GridMeasure, b: GridMeasure) -> float:
    return emd_exact(a, b)[0]


def emd_cdf_1d(a: GridMeasure, b: GridMeasure) -> float:
    """ℓ1 distance between prefix-sum vectors; equals EMD for 1D probability measures."""
    _check_pair(a, b)
    if a.dims != 1:
        raise ContractViolation("emd_cdf_1d needs dims = 1")
    if a.kind != PROBABILITY or b.kind != PROBABILITY:
        raise ContractViolation("emd_cdf_1d needs probability measures")
    diff = np.zeros(a.delta)
    np.add.at(diff, a.points[:, 0], a.weights)
    np.add.at(diff, b.points[:, 0], -b.weights)
    return float(np.abs(np.cumsum(diff)).sum())


def check_granularity(x: GridMeasure, g: GranularitySpec) -> bool:
    s = x.weights * g.N
    return bool(np.all(np.abs(s - np.round(s)) <= MASS_TOL))


def full_grid(delta: int, dims: int) -> np.ndarray:
    axes = [np.arange(delta)] * dims
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)


def default_candidates(x: GridMeasure, k: int) -> np.ndarray:
    """Full grid for Δ ≤ 16, otherwise the support plus a coarse sub-grid."""
    if x.delta <= 16:
        return full_grid(x.delta, x.dims)
    step = max(1, x.delta // 16)
    coarse = np.stack(np.meshgrid(*[np.arange(0, x.delta, step)] * x.dims, indexing="ij"),
                      axis=-1).reshape(-1, x.dims)
    pts = np.unique(np.vstack([x.points, coarse]), axis=0)
    return pts


def best_k_sparse(x: GridMeasure, k: int, candidate_centers=None):
    """Brute-force k-median: exhaustive search over k-subsets of candidate centers.

    Returns (centers, cost, approx).  Ties go to the lexicographically first
    subset in candidate order.
    """
    if k < 1:
        raise ContractViolation("k must be >= 1")
    cand = default_candidates(x, k) if candidate_centers is None else np.asarray(candidate_centers, np.int64).reshape(-1, x.dims)
    nc = len(cand)
    if k > nc:
        raise ContractViolation(f"k={k} exceeds {nc} candidates")
    if x.support_size == 0:
        centers = cand[:k]
        return [tuple(int(c) for c in p) for p in centers], 0.0, x
    Dm = l1_cost_matrix(x.points, cand)          # (n, nc)
    w = x.weights
    best_cost, best_set = np.inf, None
    if k >= x.support_size:
        # each support point can be its own center if it is a candidate
        cand_index = {tuple(int(c) for c in p): i for i, p in enumerate(cand)}
        own = [cand_index.get(tuple(int(c) for c in p)) for p in x.points]
        if all(o is not None for o in own):
            chosen = sorted(set(own))
            rest = [i for i in range(nc) if i not in set(chosen)][: k - len(chosen)]
            best_set = tuple(sorted(chosen + rest))
            best_cost = 0.0
    if best_set is None:
        # recurse on prefixes, vectorise the last center
        for prefix in itertools.combinations(range(nc), k - 1):
            start = prefix[-1] + 1 if prefix else 0
            if start >= nc:
                continue
            base = Dm[:, list(prefix)].min(axis=1) if prefix else np.full(len(w), np.inf)
            tot = np.minimum(base[:, None], Dm[:, start:]) .T @ w
            j = int(np.argmin(tot))
            if tot[j] < best_cost - 1e-12:
                best_cost = float(tot[j])
                best_set = tuple(prefix) + (start + j,)
    centers = cand[list(best_set)]
    assign = np.argmin(Dm[:, list(best_set)], axis=1)
    atoms: dict = {}
    for p_i, c_i in enumerate(assign):
        key = tuple(int(c) for c in centers[c_i])
        atoms[key] = atoms.get(key, 0.0) + float(w[p_i])
    approx = GridMeasure.from_atoms(x.delta, x.dims, atoms, x.kind)
    cost = float(math.fsum(w * Dm[np.arange(len(w)), np.asarray(best_set)[assign]]))
    return [tuple(int(c) for c in p) for p in centers], cost, approx


# measure file format

HEADER = "emd-measure v1"


def format_measure(x: GridMeasure) -> str:
    lines = [f"{HEADER} delta={x.delta} dims={x.dims} kind={x.kind}"]
    for p, w in zip(x.points, x.weights):
        lines.append(" ".join(str(int(c)) for c in p) + " " + _fmt(w))
    return "\n".join(lines) + "\n"


def parse_measure(text: str) -> GridMeasure:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith(HEADER):
        raise ContractViolation("missing 'emd-measure v1' header")
    fields = dict(tok.split("=", 1) for tok in lines[0][len(HEADER):].split())
    try:
        delta, dims, kind = int(fields["delta"]), int(fields["dims"]), fields["kind"]
    except (KeyError, ValueError) as e:
        raise ContractViolation(f"bad header: {lines[0]!r}") from e
    if dims not in (1, 2):
        raise ContractViolation("dims must be 1 or 2")
    pts, ws, seen = [], [], set()
    for ln in lines[1:]:
        tok = ln.split()
        if len(tok) != dims + 1:
            raise ContractViolation(f"bad atom line {ln!r}")
        p = tuple(int(t) for t in tok[:dims])
        if p in seen:
            raise ContractViolation(f"duplicate point {p}")
        if any(c < 0 or c >= delta for c in p):
            raise ContractViolation(f"point {p} outside [0, {delta})")
        seen.add(p)
        pts.append(p)
        ws.append(float(tok[dims]))
    return GridMeasure(delta, dims, pts, ws, kind)


def write_measure(path, x: GridMeasure):
    Path(path).write_text(format_measure(x))


def read_measure(path) -> GridMeasure:
    return parse_measure(Path(path).read_text())
