"""Independent oracles shared by the tests (nothing here calls package code)."""
import itertools

import numpy as np
import pytest
from scipy.optimize import linprog


def lp_emd(P, a, Q, b, penalty):
    """EMD by LP: flows f_ij >= 0, row sums <= a, column sums <= b, unmatched mass costs ``penalty``.

    cost = Σ f_ij |p_i - q_j|_1 + penalty (Σa - Σf) + penalty (Σb - Σf)."""
    P, Q = np.atleast_2d(P), np.atleast_2d(Q)
    a, b = np.asarray(a, float), np.asarray(b, float)
    n, m = len(a), len(b)
    C = np.abs(P[:, None, :] - Q[None, :, :]).sum(-1).ravel() - 2 * penalty
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    res = linprog(C, A_ub=A, b_ub=np.concatenate([a, b]), bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun + penalty * (a.sum() + b.sum()))


def lp_emd_measures(x, y):
    return lp_emd(x.points, x.weights, y.points, y.weights, x.dims * x.delta)


def brute_kmedian(points, weights, k, cands):
    """min over k-subsets of cands of Σ w_i min_c |p_i - c|_1."""
    P, w, C = np.asarray(points), np.asarray(weights), np.asarray(cands)
    D = np.abs(P[:, None, :] - C[None, :, :]).sum(-1)
    return min(float(D[:, list(S)].min(1) @ w) for S in itertools.combinations(range(len(C)), k))


def grid_norm_pair(p, q, shift, levels):
    """‖G_s(δ_p - δ_q)‖₁ for two unit masses: 2·2^t on every level whose cells split p and q."""
    tot = 0.0
    for t in range(levels):
        cp = tuple((c + s) >> t for c, s in zip(p, shift))
        cq = tuple((c + s) >> t for c, s in zip(q, shift))
        tot += 2.0 * 2 ** t * (cp != cq)
    return tot


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
