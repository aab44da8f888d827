"""1-median from Cauchy med-norm sketches, on a line and in d dimensions.

Both constructions observe A·M where M is a small matrix whose columns span a
subspace containing every candidate's cost vector; a candidate's cost is
estimated by the med-norm of A·M·z for its coefficient vector z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import ContractViolation
from .l1sketch import CauchySketcher

M_CONST = 40.0          # m >= M_CONST · log(1/eps) / eps²  for median_1d
C_G_DEFAULT = 8.0       # t = ceil(C_G · d / eps²) Gaussian rows


def med_norm(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """Median of |v| (mean of the middle two for even length)."""
    return np.median(np.abs(v), axis=axis)


@dataclass
class SubspaceReport:
    samples: int
    m: int
    epsilon: float
    inside: int                 # samples with (1-eps)|x|_1 <= med(Ax) <= (1+eps)|x|_1
    worst_low: float            # min ratio med(Ax)/|x|_1
    worst_high: float

    @property
    def fraction(self) -> float:
        return self.inside / max(1, self.samples)


def cauchy_subspace_check(basis, m: int, epsilon: float, samples: int = 500, seed: int = 0) -> SubspaceReport:
    """Sample vectors of span(basis) and test the med-norm sandwich for one Cauchy matrix."""
    B = np.atleast_2d(np.asarray(basis, float))            # (d, n)
    g = seeding.rng(seed, seeding.MEDIAN, 0)
    A = CauchySketcher(m, seeding.child_seed(seed, seeding.MEDIAN, 1)).columns(np.arange(B.shape[1])).T
    AB = A @ B.T                                          # (m, d)
    coef = g.standard_normal((samples, B.shape[0]))
    X = coef @ B                                          # sampled vectors
    l1 = np.abs(X).sum(1)
    med = med_norm(AB @ coef.T, axis=0)
    nz = l1 > 0
    ratio = np.where(nz, med / np.where(nz, l1, 1.0), 1.0)
    ok = np.where(nz, (ratio >= 1 - epsilon) & (ratio <= 1 + epsilon), med == 0)
    return SubspaceReport(samples, m, epsilon, int(ok.sum()), float(ratio.min()), float(ratio.max()))


# one dimension

@dataclass
class MedianInstance1D:
    n: int
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        if self.x.shape != (self.n,):
            raise ContractViolation("x must have length n")
        if np.any(self.x < 0) or not np.all(np.isfinite(self.x)):
            raise ContractViolation("weights must be finite and nonnegative")

    def cost(self, j) -> np.ndarray:
        j = np.atleast_1d(np.asarray(j, float))
        return np.abs(np.arange(self.n)[None, :] - j[:, None]) @ self.x

    @classmethod
    def from_points(cls, n: int, points, weights=None):
        x = np.zeros(n)
        np.add.at(x, np.asarray(points, np.int64), 1.0 if weights is None else np.asarray(weights, float))
        return cls(n, x)


def min_rows_1d(epsilon: float) -> int:
    return int(math.ceil(M_CONST * math.log(1 / epsilon) / epsilon ** 2))


def measure_1d(inst: MedianInstance1D, m: int, seed: int) -> np.ndarray:
    """The m x 2 block A·D_x·B with B = [i, 1]: 2m linear measurements of x."""
    sk = CauchySketcher(m, seeding.child_seed(seed, seeding.MEDIAN, 1))
    S = np.flatnonzero(inst.x)
    A = sk.columns(S).T                                   # only columns where x is nonzero matter
    B = np.stack([S.astype(float), np.ones(len(S))], axis=1)
    return A @ (inst.x[S, None] * B)


def median_1d(inst: MedianInstance1D, m: int, epsilon: float, seed: int):
    """(j_hat, cost estimate): argmin over j of med(A D_x B (j, -1))."""
    if m < min_rows_1d(epsilon):
        raise ContractViolation(f"m={m} below {min_rows_1d(epsilon)} rows for eps={epsilon}")
    if not inst.x.any():
        raise ContractViolation("all-zero instance has no median")
    M = measure_1d(inst, m, seed)
    J = np.arange(inst.n, dtype=float)
    est = med_norm(M[:, 0:1] - M[:, 1:2] * J[None, :], axis=0)
    j = int(np.argmin(est))
    return j, float(est[j])


# d dimensions

def dvoretsky_rows(d: int, epsilon: float, C_G: float = C_G_DEFAULT) -> int:
    return int(math.ceil(C_G * d / epsilon ** 2))


def gaussian_embedding(d: int, t: int, epsilon: float, seed: int) -> np.ndarray:
    """t x d Gaussian matrix scaled by sqrt(pi/2) / (t (1 + eps/2)).

    E|Gx|_1 = |x|_2 / (1 + eps/2), which centres |x|_2 / |Gx|_1 inside [1, 1 + eps]."""
    g = seeding.rng(seed, seeding.MEDIAN, 2)
    return g.standard_normal((t, d)) * math.sqrt(math.pi / 2) / (t * (1 + epsilon / 2))


def dvoretsky_fraction(G: np.ndarray, epsilon: float, samples: int = 500, seed: int = 0) -> float:
    """Fraction of random x with |Gx|_1 <= |x|_2 <= (1 + eps)|Gx|_1."""
    g = seeding.rng(seed, seeding.MEDIAN, 3)
    X = g.standard_normal((samples, G.shape[1]))
    a = np.abs(X @ G.T).sum(1)
    b = np.linalg.norm(X, axis=1)
    return float(np.mean((a <= b) & (b <= (1 + epsilon) * a)))


def calibrate_C_G(d: int, epsilon: float, samples: int = 500, seed: int = 0, target: float = 0.99,
                  grid=(1, 2, 3, 4, 6, 8, 12, 16, 24, 32)) -> float:
    """Smallest C_G on ``grid`` whose embedding passes the sandwich on ``target`` of samples."""
    for c in grid:
        G = gaussian_embedding(d, dvoretsky_rows(d, epsilon, c), epsilon, seed)
        if dvoretsky_fraction(G, epsilon, samples, seed) >= target:
            return float(c)
    return float(grid[-1])


@dataclass
class MedianSketchD:
    d: int
    t: int
    m: int
    G: np.ndarray
    block: np.ndarray       # A C_x G', shape (m, d + 1)

    def estimate(self, P: np.ndarray) -> np.ndarray:
        """med-norm of A C_x G' z^(p) for candidate rows p."""
        Z = np.hstack([np.asarray(P, float), -np.ones((len(P), 1))])
        return med_norm(self.block @ Z.T, axis=0)


def euclid_cost(points, weights, P) -> np.ndarray:
    """Σ_q w_q |p - q|_2 for each candidate row p."""
    Q = np.asarray(points, float)
    return np.linalg.norm(np.asarray(P, float)[:, None, :] - Q[None, :, :], axis=2) @ np.asarray(weights, float)


def sketch_dd(points, weights, d: int, n: int, m: int, epsilon: float, seed: int, C_G: float = C_G_DEFAULT) -> MedianSketchD:
    """Observe A C_x G' where C_x stacks x_p [I | Gp] over the support.

    Block p of C_x G' is x_p [G | Gp]; column (p, r) of A is keyed by the
    point's linear index and the row r of G."""
    Q = np.asarray(points, np.int64).reshape(-1, d)
    w = np.asarray(weights, float)
    t = dvoretsky_rows(d, epsilon, C_G)
    G = gaussian_embedding(d, t, epsilon, seed)
    sk = CauchySketcher(m, seeding.child_seed(seed, seeding.MEDIAN, 4))
    block = np.zeros((m, d + 1))
    for q, wq in zip(Q, w):
        lin = 0
        for c in q:
            lin = lin * n + int(c)
        A_q = sk.columns(lin * t + np.arange(t)).T        # (m, t)
        block += wq * (A_q @ np.hstack([G, (G @ q)[:, None]]))
    return MedianSketchD(d, t, m, G, block)


def median_dd(points, weights, d: int, n: int, m: int, epsilon: float, seed: int, C_G: float = C_G_DEFAULT):
    """(p_hat, cost estimate) by exhaustive search of [n]^d under the sketched cost."""
    w = np.asarray(weights, float)
    if w.sum() <= 0:
        raise ContractViolation("zero total weight")
    sk = sketch_dd(points, w, d, n, m, epsilon, seed, C_G)
    P = np.stack(np.meshgrid(*[np.arange(n)] * d, indexing="ij"), axis=-1).reshape(-1, d)
    est = sk.estimate(P)
    i = int(np.argmin(est))
    return tuple(int(c) for c in P[i]), float(est[i])
