"""Navigating-net search for the nearest k-sparse measure and end-to-end recovery."""
from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeding
from ._kernels import sketch_argmin, sketch_medians
from .errors import ContractViolation
from .l1sketch import AmplifiedSketch, SketchedMeasure, SketchParams, default_reps
from .measure import GridMeasure, format_measure
from .nets import NetRegistry
from .universe import SparseUniverse


@dataclass(frozen=True)
class RecoveryParams:
    epsilon: float
    lam: float
    Lambda: float
    K: float
    D: float
    alpha: float
    beta: float
    gamma: float
    L: int

    def radius(self, i: int) -> float:
        return 2.0 * self.alpha ** i * self.Lambda

    def radii(self) -> list:
        return [self.radius(i) for i in range(self.L + 1)]

    def violations(self) -> list:
        a, b, g, K, D = self.alpha, self.beta, self.gamma, self.K, self.D
        bad = []
        if not K * K * (a + 2 * g) <= a * b * (1 + 1e-12):
            bad.append("K^2 (alpha + 2 gamma) <= alpha beta")
        if not (g > D * K and D * K * g / (a * (g - D * K)) <= (1 + self.epsilon) * D * K * (1 + 1e-12)):
            bad.append("D K gamma / (alpha (gamma - D K)) <= (1 + eps) D K")
        if not 2 * g * a ** self.L * self.Lambda <= self.lam * (1 + 1e-12):
            bad.append("2 gamma alpha^L Lambda <= lambda")
        return bad

    def return_bound(self) -> float:
        """Ratio bound for early returns: D K gamma / (alpha (gamma - D K))."""
        return self.D * self.K * self.gamma / (self.alpha * (self.gamma - self.D * self.K))


def derive_params(epsilon: float, lam: float, Lambda: float, K_quasi: float = 1.0, D_eff: float = 1.0,
                  gamma: float | None = None, alpha: float | None = None) -> RecoveryParams:
    """alpha = 1 - eps/8, gamma = 8 D K / eps, beta = K^2 (alpha + 2 gamma) / alpha and the
    smallest L with 2 gamma alpha^L Lambda <= lambda.  ``gamma``/``alpha`` overrides exist
    for probing the constraints."""
    if not 0 < epsilon < 1 / 3:
        raise ContractViolation("epsilon must lie in (0, 1/3)")
    if lam <= 0 or Lambda <= 0:
        raise ContractViolation("lambda and Lambda must be positive")
    if K_quasi < 1 or D_eff < 1:
        raise ContractViolation("K and D must be >= 1")
    a = 1.0 - epsilon / 8.0 if alpha is None else float(alpha)
    g = 8.0 * D_eff * K_quasi / epsilon if gamma is None else float(gamma)
    if g <= D_eff * K_quasi:
        raise ContractViolation("gamma must exceed D K (violates D K gamma / (alpha (gamma - D K)) <= (1 + eps) D K)")
    b = K_quasi ** 2 * (a + 2.0 * g) / a
    ratio = 2.0 * g * Lambda / lam
    L = max(0, int(math.ceil(math.log(ratio) / math.log(1.0 / a)))) if ratio > 1 else 0
    # guard against rounding right at the boundary
    while 2.0 * g * a ** L * Lambda > lam:
        L += 1
    p = RecoveryParams(epsilon, lam, Lambda, K_quasi, D_eff, a, b, g, L)
    bad = p.violations()
    if bad:
        raise ContractViolation("infeasible recovery parameters: " + "; ".join(bad))
    return p


@dataclass
class TraceStep:
    level: int
    size: int
    chosen: int
    q: float
    radius: float

    def as_dict(self, U: SparseUniverse | None = None):
        d = asdict(self)
        if U is not None:
            d["chosen_measure"] = U.measure(self.chosen).atoms().__repr__()
        return d


@dataclass
class RecoveryResult:
    estimate: GridMeasure
    estimate_index: int
    trace: list
    terminated_at: object            # level of the early return, or "L"
    params: RecoveryParams
    queries: int
    q_y0: float
    sets: list | None = None         # S_i as universe indices (kept on request)
    meta: dict = field(default_factory=dict)

    def to_json(self, U: SparseUniverse | None = None) -> str:
        doc = {"estimate": format_measure(self.estimate),
               "terminated_at": self.terminated_at,
               "queries": self.queries,
               "q_y0": self.q_y0,
               "params": asdict(self.params),
               "trace": [s.as_dict(U) for s in self.trace],
               "meta": self.meta}
        return json.dumps(doc, indent=1, sort_keys=True)


class ExactQuery:
    """q from a vectorised function of universe indices, cached per member."""

    def __init__(self, f):
        self.f = f
        self.cache: dict = {}

    @property
    def count(self) -> int:
        return len(self.cache)

    def values(self, J) -> np.ndarray:
        J = np.asarray(J, dtype=np.int64)
        miss = [j for j in J.tolist() if j not in self.cache]
        if miss:
            vals = np.asarray(self.f(np.asarray(miss, dtype=np.int64)), float)
            self.cache.update(zip(miss, vals.tolist()))
        return np.array([self.cache[j] for j in J.tolist()])

    def argmin(self, S):
        vals = self.values(S)
        j = int(np.argmin(vals))        # first minimum in the given (canonical) order
        return int(S[j]), float(vals[j])


class SketchQuery:
    """q(y) = median over pipelines of the row medians of |S_p(x - y)|, normalised.

    ``argmin`` skips candidates that provably lose to the best value seen so
    far (see ``sketch_argmin``), so only the winner and its near rivals are
    evaluated in full; ties still go to the first candidate in canonical order.
    """

    def __init__(self, sm: SketchedMeasure, U: SparseUniverse):
        self.X = np.ascontiguousarray(sm.values)
        self.T = sm.pipelines().point_table()
        self.scale = sm.scale()
        self.U = U
        self.raw = np.full(len(U), np.nan)      # exact raw values
        self.lb = np.full(len(U), -np.inf)      # raw value is strictly above this

    @property
    def count(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.raw) | (self.lb > -np.inf)))

    def values(self, J) -> np.ndarray:
        J = np.asarray(J, dtype=np.int64)
        miss = np.unique(J[np.isnan(self.raw[J])])
        if len(miss):
            med = sketch_medians(self.X, self.T, self.U.idx[miss], self.U.w[miss])
            self.raw[miss] = np.median(med, axis=0)
        return self.raw[J] * self.scale

    def argmin(self, S):
        S = np.asarray(S, dtype=np.int64)
        known = self.raw[S]
        best = np.nanmin(known) if np.any(~np.isnan(known)) else np.inf
        todo = S[np.isnan(known) & (self.lb[S] < best)]
        if len(todo):
            vals, lbs = sketch_argmin(self.X, self.T, self.U.idx[todo], self.U.w[todo], best)
            ok = ~np.isnan(vals)
            self.raw[todo[ok]] = vals[ok]
            self.lb[todo[~ok]] = lbs[~ok]
        known = self.raw[S]
        i = int(np.nanargmin(known))            # first minimum in canonical order
        return int(S[i]), float(known[i] * self.scale)


def search(q, U: SparseUniverse, params: RecoveryParams, reg: NetRegistry, y0: int,
           keep_sets: bool = False, adaptive: bool = True) -> RecoveryResult:
    """Navigating-net descent.

    ``q`` is an ExactQuery/SketchQuery or a function mapping an array of
    universe indices to distance estimates.  At level i the candidates are the
    net points of N_i inside the ball around y_{i-1}; the ball radius is
    K^2 (r_i + 2 q(y_{i-1})), which never exceeds beta r_i once
    q(y_{i-1}) <= gamma r_{i-1} and is exactly what the covering argument
    uses (pass ``adaptive=False`` for the plain beta r_i ball).
    """
    oracle = q if hasattr(q, "argmin") else ExactQuery(q)
    y_prev = int(y0)
    q_prev = float(oracle.values([y_prev])[0])
    q_y0 = q_prev
    trace, sets = [], []
    terminated = "L"
    for i in range(1, params.L + 1):
        r_i = params.radius(i)
        rad = params.beta * r_i
        if adaptive:
            rad = min(rad, params.K ** 2 * (r_i + 2.0 * q_prev))
        S = reg.expand(i, y_prev, rad)
        if keep_sets:
            sets.append(list(S))
        if not S:
            terminated = i
            break
        y_i, q_i = oracle.argmin(S)
        trace.append(TraceStep(i, len(S), y_i, q_i, rad))
        if q_i > params.gamma * r_i:
            terminated = i
            break
        y_prev, q_prev = y_i, q_i
    return RecoveryResult(U.measure(y_prev), y_prev, trace, terminated, params, oracle.count, q_y0,
                          sets if keep_sets else None)


@functools.lru_cache(maxsize=2)
def get_universe(delta: int, dims: int, k: int, N: int) -> SparseUniverse:
    return SparseUniverse(delta, dims, k, N)


def detect_granularity(x: GridMeasure, max_N: int = 64):
    for N in range(1, max_N + 1):
        u = x.weights * N
        if np.all(np.abs(u - np.round(u)) <= 1e-9):
            return N
    return None


def center_index(U: SparseUniverse) -> int:
    c = U.delta // 2
    pt = (c,) * U.dims
    return U.index_of(GridMeasure(U.delta, U.dims, [pt], [1.0]))


def planned_budget(params: RecoveryParams, cap: int = 4096) -> int:
    """A-priori query budget used to size R.

    The bound L (K^2 (1 + 2 beta))^{O(d)} has no usable constant at this scale,
    so the per-level candidate count is capped by ``cap`` instead.
    """
    return max(2, (params.L + 1) * cap)


def _recover(x: GridMeasure, k: int, epsilon: float, lam: float, seed: int, dims: int, *,
             granularity, mode, m, R, eps_c, c_L, D_eff, keep_sets, sketch_mode):
    if x.dims != dims:
        raise ContractViolation(f"expected a {dims}-dimensional measure")
    if x.kind != "probability":
        raise ContractViolation("recovery needs a probability measure")
    N = granularity or detect_granularity(x) or 20
    U = get_universe(x.delta, dims, k, N)
    Lambda = 2.0 * dims * x.delta
    D = 1.0 if mode == "oracle" else D_eff
    params = derive_params(epsilon, lam, Lambda, 1.0, D)
    meta = {"mode": mode, "N": N, "k": k, "seed": seed}
    if mode == "oracle":
        q = ExactQuery(lambda J: U.dist_measure(x, J))
    else:
        R = R or default_reps(planned_budget(params))
        sp = SketchParams(x.delta, dims, R, m, seeding.child_seed(seed, seeding.RECOVERY, 0),
                          eps_c, c_L, sketch_mode)
        sm = AmplifiedSketch(sp).apply(x)
        meta.update({"R": R, "m": m, "eps_c": eps_c, "c_L": c_L, "D_eff": D_eff})
        q = SketchQuery(sm, U)
    y0 = center_index(U)
    reg = NetRegistry(U, params.radii(), y0)
    res = search(q, U, params, reg, y0, keep_sets=keep_sets)
    res.meta = meta
    return res


def recover_square(x: GridMeasure, k: int, epsilon: float, lam: float, seed: int, *,
                   granularity: int | None = None, mode: str = "sketch", m: int = 64,
                   R: int | None = None, eps_c: float = 0.2, calibration=None,
                   keep_sets: bool = False) -> RecoveryResult:
    """Sketch x with R grid-embedding pipelines, then search the k-sparse universe."""
    c_L, D_eff = 1.0, 1.0
    if mode != "oracle":
        from .calibration import constants_for
        c_L, D_eff = constants_for(x.delta, 2, eps_c, calibration)
    return _recover(x, k, epsilon, lam, seed, 2, granularity=granularity, mode=mode, m=m, R=R,
                    eps_c=eps_c, c_L=c_L, D_eff=D_eff, keep_sets=keep_sets, sketch_mode="grid")


def recover_interval(x: GridMeasure, k: int, epsilon: float, lam: float, seed: int, *,
                     granularity: int | None = None, mode: str = "sketch", m: int = 2000,
                     R: int | None = None, eps_c: float | None = None,
                     keep_sets: bool = False) -> RecoveryResult:
    """1D recovery through the prefix-sum isometry; the distortion is only sketch noise.

    The accuracy budget is split: the search runs at eps/2 and the Cauchy
    estimator at eps/5, so (1 + eps/2)(1 + eps/5)/(1 - eps/5) <= 1 + eps.
    """
    if eps_c is None:
        eps_c = epsilon / 5.0
    D_eff = (1.0 + eps_c) / (1.0 - eps_c)
    return _recover(x, k, epsilon / 2.0 if mode != "oracle" else epsilon, lam, seed, 1,
                    granularity=granularity, mode=mode, m=m, R=R, eps_c=eps_c, c_L=1.0,
                    D_eff=D_eff, keep_sets=keep_sets, sketch_mode="cdf")
