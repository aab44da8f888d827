"""Covers of EMD balls around k-sparse measures by enumerating guessed flows.

The enumeration guesses, for every support point of the centre, how many flow
edges leave it, the (geometrically rounded) length of each edge, an endpoint
from a lattice net of the ℓ1 ball of that length, and a geometrically
rounded mass.  With the default knobs the enumeration has astronomically many
members even at Δ = 16, so ``BallCover`` is lazy: it counts members exactly,
decides membership of an assignment, builds the member that covers a given
measure (the witness), and materialises everything only when the knobs make
the set small.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .measure import PROBABILITY, GridMeasure, emd_exact


@dataclass(frozen=True)
class CoverKnobs:
    ratio: float = 1.01            # geometric step for lengths and masses
    net_divisor: float = 100.0     # BuildNet(p, l) is an (l / net_divisor)-net
    mass_divisor: float = 100.0    # m0 = R / (mass_divisor · Δ · k)
    multiplicity: int | None = None   # bound on the total number of edges, default 2k


@dataclass(frozen=True)
class BallCoverRequest:
    center: GridMeasure
    radius: float
    k: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ContractViolation("cover radius must be positive")
        if self.k < 1 or self.center.support_size > self.k:
            raise ContractViolation(f"center has {self.center.support_size} atoms, more than k={self.k}")
        if self.center.kind != PROBABILITY:
            raise ContractViolation("center must be a probability measure")
        if self.radius > 2 * self.center.dims * self.center.delta:
            raise ContractViolation("radius exceeds 2·d·Δ")


def geometric(lo: float, hi: float, ratio: float) -> np.ndarray:
    """lo, lo·ratio, lo·ratio², ... below hi, then hi itself."""
    if hi < lo:
        return np.array([hi])
    n = int(math.floor(math.log(hi / lo) / math.log(ratio) + 1e-12))
    v = lo * ratio ** np.arange(n + 1)
    v = v[v < hi * (1 - 1e-12)]
    return np.append(v, hi)


def lattice_step(l: float, divisor: float) -> int:
    return max(1, int(math.floor(l / divisor)))


def build_net(p, l: float, delta: int, divisor: float = 100.0) -> np.ndarray:
    """Lattice points p + h·z (h = max(1, ⌊l/divisor⌋)) in the ℓ1 ball B(p, l) ∩ [Δ]^d.

    Any grid point of the ball is within ℓ1 distance h of a lattice point, and
    h <= l/divisor whenever h > 1; for h = 1 the net is the whole ball."""
    p = np.asarray(p, np.int64)
    h = lattice_step(l, divisor)
    rad = int(math.floor(l / h + 1e-9))
    axes = [np.arange(-rad, rad + 1)] * len(p)
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(p))
    Z = Z[np.abs(Z).sum(1) <= rad]
    P = p + h * Z
    P = P[((P >= 0) & (P < delta)).all(1)]
    return P[np.lexsort(P.T[::-1])]


def net_size(p, l: float, delta: int, divisor: float = 100.0) -> int:
    """|build_net(p, l)| without materialising it."""
    p = np.asarray(p, np.int64)
    h = lattice_step(l, divisor)
    rad = int(math.floor(l / h + 1e-9))
    lo = np.ceil(-p / h).astype(np.int64)                 # lattice index range inside the grid
    hi = np.floor((delta - 1 - p) / h).astype(np.int64)
    if len(p) == 1:
        return int(max(0, min(hi[0], rad) - max(lo[0], -rad) + 1))
    z1 = np.arange(max(lo[0], -rad), min(hi[0], rad) + 1)
    rem = rad - np.abs(z1)
    cnt = np.minimum(hi[1], rem) - np.maximum(lo[1], -rem) + 1
    return int(np.clip(cnt, 0, None).sum())


def count_tuples(values: np.ndarray, c: int, cap: float):
    """(count, exact) of c-tuples over ``values`` (sorted, containing 0) with sum <= cap.

    Exact up to c = 4 by meet-in-the-middle; larger c returns the trivial
    bound len(values)**c with exact=False."""
    tol = 1e-12
    v = np.sort(values)
    if c == 0:
        return 1, True
    if c == 1:
        return int(np.searchsorted(v, cap + tol, side="right")), True
    if c > 4:
        return len(v) ** c, False
    a = c // 2
    b = c - a

    def sums(t):
        s = v[v <= cap + tol]
        out = s
        for _ in range(t - 1):
            out = (out[:, None] + s[None, :]).ravel()
            out = out[out <= cap + tol]
        return np.sort(out)

    A, B = sums(a), sums(b)
    return int(np.searchsorted(B, cap + tol - A, side="right").sum()), True


def _compositions(total_max: int, parts: int):
    """Vectors of ``parts`` positive integers with sum <= total_max."""
    for s in range(parts, total_max + 1):
        for cuts in itertools.combinations(range(1, s), parts - 1):
            bounds = (0,) + cuts + (s,)
            yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


@dataclass
class CoverWitness:
    measure: GridMeasure
    assignment: list      # per centre atom: list of (length, endpoint, mass)
    flow_edges: int


class BallCover:
    """Lazy view of the enumerated cover of B_EMD(center, R) (see module docstring)."""

    def __init__(self, req: BallCoverRequest, knobs: CoverKnobs | None = None):
        self.req = req
        self.knobs = knobs or CoverKnobs()
        mu = req.center
        self.delta, self.dims = mu.delta, mu.dims
        self.multiplicity = self.knobs.multiplicity or 2 * req.k
        self.lengths = geometric(1.0, 2.0 * self.delta, self.knobs.ratio)
        self.m0 = req.radius / (self.knobs.mass_divisor * self.delta * req.k)
        top = min(1.0, req.radius)
        self.masses = np.concatenate([[0.0], geometric(self.m0, top, self.knobs.ratio)])
        self._mass_set = set(self.masses.tolist())
        self._len_set = set(self.lengths.tolist())

    # counting
    def edge_choices(self, p) -> int:
        """Σ_l |BuildNet(p, l)|: (length, endpoint) choices for one edge leaving p."""
        return sum(net_size(p, l, self.delta, self.knobs.net_divisor) for l in self.lengths)

    def size(self):
        """(number of enumerated tuples, exact).  Distinct measures can only be fewer."""
        mu = self.req.center
        A = [self.edge_choices(p) for p in mu.points]
        total, exact = 0, True
        cache: dict = {}
        for c in _compositions(self.multiplicity, mu.support_size):
            term = 1
            for i, ci in enumerate(c):
                key = (ci, float(mu.weights[i]))
                if key not in cache:
                    cache[key] = count_tuples(self.masses, ci, mu.weights[i])
                n, ex = cache[key]
                exact &= ex
                term *= A[i] ** ci * n
            total += term
        return total, exact

    def log_size(self) -> float:
        n, _ = self.size()
        return math.log(n)

    # membership
    def _assemble(self, assignment) -> GridMeasure:
        mu = self.req.center
        atoms: dict = {}
        for p, w, edges in zip(mu.points, mu.weights, assignment):
            s = 0.0
            for _, q, m in edges:
                s += m
                key = tuple(int(c) for c in q)
                atoms[key] = atoms.get(key, 0.0) + m
            key = tuple(int(c) for c in p)
            atoms[key] = atoms.get(key, 0.0) + w - s
        atoms = {q: v for q, v in atoms.items() if v > 1e-15}
        x = GridMeasure.from_atoms(self.delta, self.dims, atoms, "general")
        return GridMeasure(self.delta, self.dims, x.points, x.weights / x.total_mass, PROBABILITY)

    def contains(self, assignment) -> bool:
        """True iff ``assignment`` is one of the enumerated (c, l, p, m) choices."""
        mu = self.req.center
        if len(assignment) != mu.support_size:
            return False
        if sum(len(e) for e in assignment) > self.multiplicity or any(len(e) == 0 for e in assignment):
            return False
        for p, w, edges in zip(mu.points, mu.weights, assignment):
            if sum(m for _, _, m in edges) > w + 1e-12:
                return False
            for l, q, m in edges:
                if l not in self._len_set or m not in self._mass_set:
                    return False
                q = np.asarray(q, np.int64)
                h = lattice_step(l, self.knobs.net_divisor)
                z = q - p
                if np.any(z % h) or np.abs(z).sum() > l + 1e-9 or np.any(q < 0) or np.any(q >= self.delta):
                    return False
        return True

    # covering
    def witness(self, nu: GridMeasure) -> CoverWitness:
        """The enumerated member built from an optimal flow center -> nu."""
        mu = self.req.center
        if nu.delta != self.delta or nu.dims != self.dims or nu.kind != PROBABILITY:
            raise ContractViolation("witness needs a probability measure on the same grid")
        edges = sparse_flow(mu, nu)
        out = []
        nflow = 0
        for i, p in enumerate(mu.points):
            mine = [(q, w) for (s, q, w) in edges if s == i and not np.array_equal(nu.points[q], p)]
            nflow += len(mine)
            chosen = []
            for q, w in mine:
                tgt = nu.points[q]
                ell = float(np.abs(tgt - p).sum())
                l = float(self.lengths[bisect.bisect_left(self.lengths.tolist(), ell - 1e-9)])
                net = build_net(p, l, self.delta, self.knobs.net_divisor)
                pq = net[int(np.argmin(np.abs(net - tgt).sum(1)))]
                j = int(np.searchsorted(self.masses, w + 1e-12, side="right")) - 1
                chosen.append((l, tuple(int(c) for c in pq), float(self.masses[j])))
            if not chosen:
                # no mass leaves p: one edge carrying nothing
                chosen = [(float(self.lengths[0]), tuple(int(c) for c in p), 0.0)]
            out.append(chosen)
        return CoverWitness(self._assemble(out), out, nflow)

    def covering_distance(self, nu: GridMeasure) -> float:
        return emd_exact(nu, self.witness(nu).measure)[0]

    # materialisation
    def materialize(self, limit: int = 200_000) -> list:
        """All distinct members (canonical order); only for small knob settings."""
        n, _ = self.size()
        if n > limit:
            raise ContractViolation(f"cover has {n} enumerated members, above limit {limit}")
        mu = self.req.center
        per_edge = []
        for p in mu.points:
            ch = []
            for l in self.lengths:
                for q in build_net(p, l, self.delta, self.knobs.net_divisor):
                    ch.append((float(l), tuple(int(c) for c in q)))
            per_edge.append(ch)
        seen = {}
        for c in _compositions(self.multiplicity, mu.support_size):
            options = []
            for i, ci in enumerate(c):
                opts = []
                for lp in itertools.product(per_edge[i], repeat=ci):
                    for ms in itertools.product(self.masses.tolist(), repeat=ci):
                        if sum(ms) <= mu.weights[i] + 1e-12:
                            opts.append([(l, q, m) for (l, q), m in zip(lp, ms)])
                options.append(opts)
            for a in itertools.product(*options):
                x = self._assemble(list(a))
                seen.setdefault(x.canonical_key(), x)
        return [seen[k] for k in sorted(seen)]

    def __iter__(self):
        return iter(self.materialize())


def cover_ball(req: BallCoverRequest, knobs: CoverKnobs | None = None) -> BallCover:
    return BallCover(req, knobs)


def sparse_flow(a: GridMeasure, b: GridMeasure, tol: float = 1e-13):
    """Optimal flow a -> b as (i, j, mass) triples whose support graph is a forest.

    Starts from the exact solver's plan and cancels cycles: along an even cycle
    the cheaper alternate set of edges gains flow and the other loses it until
    one edge empties, which never raises the cost.  A forest on the two
    supports has at most |supp a| + |supp b| - 1 edges.
    """
    _, plan = emd_exact(a, b)
    ai = {tuple(int(c) for c in p): i for i, p in enumerate(a.points)}
    bi = {tuple(int(c) for c in p): j for j, p in enumerate(b.points)}
    F = {}
    for p, q, w in plan.edges:
        F[(ai[p], bi[q])] = F.get((ai[p], bi[q]), 0.0) + w
    for p, w in plan.retained:
        F[(ai[p], bi[p])] = F.get((ai[p], bi[p]), 0.0) + w
    cost = lambda e: float(np.abs(a.points[e[0]] - b.points[e[1]]).sum())
    while True:
        cyc = _find_cycle(list(F))
        if cyc is None:
            break
        even, odd = cyc[0::2], cyc[1::2]
        if sum(map(cost, even)) > sum(map(cost, odd)):
            even, odd = odd, even
        t = min(F[e] for e in odd)
        for e in even:
            F[e] += t
        for e in odd:
            F[e] -= t
        F = {e: w for e, w in F.items() if w > tol}
    return sorted((i, j, w) for (i, j), w in F.items())


def _find_cycle(edges):
    """A cycle (as an edge list in traversal order) of the bipartite graph, or None."""
    adj: dict = {}
    for e in edges:
        adj.setdefault(("a", e[0]), []).append((("b", e[1]), e))
        adj.setdefault(("b", e[1]), []).append((("a", e[0]), e))
    seen: set = set()
    for root in adj:
        if root in seen:
            continue
        parent = {root: (None, None)}
        stack = [root]
        while stack:
            u = stack.pop()
            seen.add(u)
            for v, e in adj[u]:
                if e == parent[u][1]:
                    continue
                if v in parent:
                    # close the cycle u ... lca ... v
                    pu, pv = [], []
                    x = u
                    anc = {}
                    while x is not None:
                        anc[x] = len(pu)
                        pu.append(x)
                        x = parent[x][0]
                    y = v
                    path_v = []
                    while y not in anc:
                        path_v.append(parent[y][1])
                        y = parent[y][0]
                    path_u = []
                    x = u
                    while x != y:
                        path_u.append(parent[x][1])
                        x = parent[x][0]
                    return path_u[::-1] + [e] + path_v
                parent[v] = (u, e)
                stack.append(v)
    return None


def sample_in_ball(mu: GridMeasure, R: float, k: int, g: np.random.Generator, tries: int = 10_000) -> GridMeasure:
    """Random k-sparse probability measure within EMD R of mu.

    Applies up to 2k random moves (source atom, target, mass) whose total cost
    stays within R, so membership in the ball holds by construction; draws
    with more than k atoms are rejected."""
    delta, dims = mu.delta, mu.dims
    for _ in range(tries):
        atoms = mu.atoms()
        budget = float(R)
        for _ in range(int(g.integers(1, 2 * k + 1))):
            src = list(atoms)[int(g.integers(len(atoms)))]
            if g.random() < 0.3 and len(atoms) > 1:
                tgt = list(atoms)[int(g.integers(len(atoms)))]
            else:
                step = g.integers(-int(math.ceil(R)) - 1, int(math.ceil(R)) + 2, size=dims)
                tgt = tuple(int(c) for c in np.clip(np.asarray(src) + step, 0, delta - 1))
            d = sum(abs(x - y) for x, y in zip(src, tgt))
            if d == 0:
                continue
            m = atoms[src] if g.random() < 0.5 else atoms[src] * g.random()
            m = min(m, budget / d)
            if m <= 1e-12:
                continue
            budget -= m * d
            atoms[src] -= m
            atoms[tgt] = atoms.get(tgt, 0.0) + m
            atoms = {p: w for p, w in atoms.items() if w > 1e-12}
        if len(atoms) <= k:
            x = GridMeasure.from_atoms(delta, dims, atoms, "general")
            return GridMeasure(delta, dims, x.points, x.weights / x.total_mass, PROBABILITY)
    raise ContractViolation("could not draw a k-sparse measure in the ball")


def round_to_granularity(mu: GridMeasure, N: int) -> GridMeasure | None:
    """Nearest-unit rounding on mu's support, then unit-by-unit repair of the total.

    Each repair step adds or removes one 1/N unit at the atom where that
    changes EMD to mu the least."""
    units = np.round(mu.weights * N).astype(np.int64)

    def build(u):
        keep = u > 0
        if not keep.any():
            return None
        return GridMeasure(mu.delta, mu.dims, mu.points[keep], u[keep] / N, PROBABILITY, validate=False)

    while units.sum() != N:
        step = 1 if units.sum() < N else -1
        best, arg = np.inf, -1
        for i in range(len(units)):
            if units[i] + step < 0:
                continue
            u = units.copy()
            u[i] += step
            x = build(u)
            if x is None:
                continue
            d = emd_exact(mu.as_kind("general"), GridMeasure(mu.delta, mu.dims, x.points, x.weights, "general"))[0]
            if d < best - 1e-12:
                best, arg = d, i
        if arg < 0:
            return None
        units[arg] += step
    x = build(units)
    return None if x is None else GridMeasure(mu.delta, mu.dims, x.points, x.weights, PROBABILITY)


def snap_to_granularity(cover, g, r: float) -> list:
    """Replace each cover point by a 1/N-granular measure within EMD r, or drop it.

    Points that are already granular are kept as they are.  A cover of radius
    r' becomes a cover of radius r' + r (2r' when r = r')."""
    from .measure import check_granularity
    out, seen = [], set()
    for mu in cover:
        if check_granularity(mu, g):
            y = mu
        else:
            y = round_to_granularity(mu, g.N)
            if y is None or emd_exact(mu, y)[0] > r + 1e-12:
                continue
        if y.canonical_key() not in seen:
            seen.add(y.canonical_key())
            out.append(y)
    return out


def growth_check(rows, holdout=None):
    """Fit log|cover| ≈ c·k·log log Δ + c' on all but the largest Δ and test the rest.

    ``rows`` holds (delta, k, log_size).  Returns (c, c', [(delta, k, log_size,
    bound, ok)]) for the held-out Δ; a cover whose size grew polynomially in Δ
    would overshoot the extrapolated line."""
    from .calibration import fit_growth, loglog
    rows = list(rows)
    hold = max(r[0] for r in rows) if holdout is None else holdout
    train = [r for r in rows if r[0] != hold]
    c, c0 = fit_growth([k * loglog(d) for d, k, _ in train], [y for _, _, y in train])
    out = []
    for d, k, y in rows:
        if d == hold:
            b = c * k * loglog(d) + c0
            out.append((d, k, y, b, y <= b))
    return c, c0, out
