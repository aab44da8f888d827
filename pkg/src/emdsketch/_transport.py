"""Dense successive-shortest-path solver for small transportation problems."""
from __future__ import annotations

import numpy as np


def solve_transport(supply, demand, cost, tol=None):
    """Min-cost flow from ``supply`` (n,) to ``demand`` (m,) over a dense cost matrix.

    Totals must agree up to rounding.  Every source can reach every sink, so the
    residual graph is the complete bipartite graph plus reverse arcs on positive
    flow.  Dijkstra runs on reduced costs; all sources that still hold supply
    keep potential zero, which makes the multi-source start exact.

    Returns the (n, m) flow matrix.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    C = np.asarray(cost, dtype=float)
    n, m = C.shape
    flow = np.zeros((n, m))
    if n == 0 or m == 0:
        return flow
    if tol is None:
        tol = 1e-13 * max(1.0, float(supply.sum()), float(demand.sum()))
    sup = supply.copy()
    dem = demand.copy()
    pu = np.zeros(n)                  # source potentials
    pv = C.min(axis=0).astype(float)  # sink potentials
    inf = np.inf

    while sup.max() > tol and dem.max() > tol:
        ds = np.where(sup > tol, 0.0, inf)
        dt = np.full(m, inf)
        done_s = np.zeros(n, bool)
        done_t = np.zeros(m, bool)
        prev_t = np.full(m, -1)   # source feeding sink j on the tree
        prev_s = np.full(n, -1)   # sink feeding source i through a reverse arc
        target = -1
        while True:
            cs = np.where(done_s, inf, ds)
            ct = np.where(done_t, inf, dt)
            i = int(np.argmin(cs))
            j = int(np.argmin(ct))
            if cs[i] == inf and ct[j] == inf:
                break
            if cs[i] <= ct[j]:
                done_s[i] = True
                nd = ds[i] + C[i] + pu[i] - pv
                better = (~done_t) & (nd < dt)
                dt[better] = nd[better]
                prev_t[better] = i
            else:
                done_t[j] = True
                if dem[j] > tol:
                    target = j
                    break
                back = flow[:, j] > tol
                if back.any():
                    nd = dt[j] - C[:, j] + pv[j] - pu
                    better = back & (~done_s) & (nd < ds)
                    ds[better] = nd[better]
                    prev_s[better] = j
        if target < 0:
            break
        dlim = dt[target]
        pu += np.minimum(ds, dlim)
        pv += np.minimum(dt, dlim)

        # walk back to the starting source to find the bottleneck
        path = []
        j = target
        delta = dem[target]
        while True:
            i = int(prev_t[j])
            path.append((i, j))
            jb = int(prev_s[i])
            if jb < 0:
                break
            delta = min(delta, flow[i, jb])
            j = jb
        delta = min(delta, sup[i])
        src = i
        for idx, (i, j) in enumerate(path):
            flow[i, j] += delta
            if idx + 1 < len(path):
                jb = path[idx + 1][1]
                flow[i, jb] -= delta
                if flow[i, jb] < tol:
                    flow[i, jb] = 0.0
        sup[src] -= delta
        dem[target] -= delta
    return flow
