"""Compiled inner loops for nets over two-atom universes."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _d22(ca, ua, cb, ub):
    """Closed-form EMD between two two-atom measures (coords (2, dims), first weight)."""
    dims = ca.shape[1]
    d00 = 0.0
    d01 = 0.0
    d10 = 0.0
    d11 = 0.0
    for t in range(dims):
        d00 += abs(ca[0, t] - cb[0, t])
        d01 += abs(ca[0, t] - cb[1, t])
        d10 += abs(ca[1, t] - cb[0, t])
        d11 += abs(ca[1, t] - cb[1, t])
    lo = max(0.0, ua + ub - 1.0)
    hi = min(ua, ub)
    c_lo = lo * d00 + (ua - lo) * d01 + (ub - lo) * d10 + (1.0 - ua - ub + lo) * d11
    c_hi = hi * d00 + (ua - hi) * d01 + (ub - hi) * d10 + (1.0 - ua - ub + hi) * d11
    return max(min(c_lo, c_hi), 0.0)


@njit(cache=True)
def build_tree(F, leaf):
    """Static kd-tree over the rows of F (median splits on the widest feature).

    Returns (perm, start, end, left, right, lo, hi): perm lists rows in tree
    order, node j covers perm[start[j]:end[j]] with bounding box [lo[j], hi[j]]
    and children left[j], right[j] (-1 at leaves)."""
    n, nf = F.shape
    cap = 2 * (n // max(leaf, 1) + 1) * 2 + 1
    perm = np.arange(n)
    start = np.empty(cap, np.int64)
    end = np.empty(cap, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    lo = np.empty((cap, nf))
    hi = np.empty((cap, nf))
    start[0] = 0
    end[0] = n
    count = 1
    stack = np.empty(cap, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        j = stack[sp]
        s, e = start[j], end[j]
        for f in range(nf):
            a = np.inf
            b = -np.inf
            for t in range(s, e):
                v = F[perm[t], f]
                if v < a:
                    a = v
                if v > b:
                    b = v
            lo[j, f] = a
            hi[j, f] = b
        if e - s <= leaf:
            continue
        f = 0
        w = -1.0
        for g in range(nf):
            if hi[j, g] - lo[j, g] > w:
                w = hi[j, g] - lo[j, g]
                f = g
        if w <= 0.0:
            continue
        seg = perm[s:e].copy()
        order = np.argsort(F[seg, f], kind="mergesort")
        perm[s:e] = seg[order]
        mid = s + (e - s) // 2
        for c, (cs, ce) in enumerate(((s, mid), (mid, e))):
            start[count] = cs
            end[count] = ce
            if c == 0:
                left[j] = count
            else:
                right[j] = count
            stack[sp] = count
            sp += 1
            count += 1
    return perm, start[:count], end[:count], left[:count], right[:count], lo[:count], hi[:count]


@njit(cache=True)
def _leaves_near(q, tol, left, right, lo, hi, out, leafmax):
    """Leaves whose box is within tol (ℓ∞) of feature vector q; returns how many.

    With ``leafmax`` (an upper bound on mind per node, or empty) leaves whose
    box lies at least leafmax away are skipped as well."""
    stack = np.empty(256, np.int64)
    stack[0] = 0
    sp = 1
    n = 0
    nf = lo.shape[1]
    use = len(leafmax) > 0
    while sp > 0:
        sp -= 1
        j = stack[sp]
        gapj = 0.0
        for f in range(nf):
            g = max(lo[j, f] - q[f], q[f] - hi[j, f])
            if g > gapj:
                gapj = g
        if gapj > tol:
            continue
        if left[j] < 0:
            if use and gapj >= leafmax[j]:
                continue
            out[n] = j
            n += 1
        else:
            stack[sp] = left[j]
            stack[sp + 1] = right[j]
            sp += 2
    return n


@njit(cache=True)
def insert_many(cands, r, gap, mind, leafmax, perm, pos, start, end, left, right, lo, hi, C, U0, F):
    """Greedy pass over ``cands`` (member indices, in scan order).

    A candidate whose ``mind`` exceeds r joins the net and lowers ``mind`` of
    every member within r.  ``mind``, C, U0 and F (coords, first weights and
    1-Lipschitz features) are all in tree order; perm maps tree order back to
    member indices and pos is its inverse.  ``leafmax[j]`` bounds mind over
    leaf j from above.  ``gap`` is the smallest distance between distinct
    members; below it every candidate is its own net point.
    Returns the chosen candidates.
    """
    out = np.empty(len(cands), np.int64)
    leaves = np.empty(len(left), np.int64)
    n = 0
    nf = F.shape[1]
    tol = r + 1e-12
    for c in cands:
        pc = pos[c]
        if mind[pc] <= r:
            continue
        out[n] = c
        n += 1
        mind[pc] = 0.0
        if tol < gap:
            continue
        nl = _leaves_near(F[pc], tol, left, right, lo, hi, leaves, leafmax)
        for g in range(nl):
            mx = 0.0
            for j in range(start[leaves[g]], end[leaves[g]]):
                # the features bound EMD from below, so members already closer
                # to the net than that bound cannot improve
                cut = min(tol, mind[j])
                ok = True
                for f in range(nf):
                    if abs(F[j, f] - F[pc, f]) >= cut:
                        ok = False
                        break
                if ok:
                    d = _d22(C[pc], U0[pc], C[j], U0[j])
                    if d <= tol and d < mind[j]:
                        mind[j] = d
                if mind[j] > mx:
                    mx = mind[j]
            leafmax[leaves[g]] = mx
    return out[:n]


@njit(cache=True)
def ball_select(c, radius, sel, perm, pos, start, end, left, right, lo, hi, C, U0, F):
    """Members m with EMD(c, m) <= radius whose tree slot is set in sel, sorted by index."""
    tol = radius + 1e-12
    nf = F.shape[1]
    a = pos[c]
    leaves = np.empty(len(left), np.int64)
    nl = _leaves_near(F[a], tol, left, right, lo, hi, leaves, np.empty(0))
    tot = 0
    for g in range(nl):
        tot += end[leaves[g]] - start[leaves[g]]
    out = np.empty(tot, np.int64)
    n = 0
    for g in range(nl):
        for j in range(start[leaves[g]], end[leaves[g]]):
            if not sel[j]:
                continue
            ok = True
            for f in range(nf):
                if abs(F[j, f] - F[a, f]) > tol:
                    ok = False
                    break
            if ok and _d22(C[a], U0[a], C[j], U0[j]) <= tol:
                out[n] = perm[j]
                n += 1
    return np.sort(out[:n])


@njit(cache=True)
def _select(a, kth):
    """kth smallest of a (partially reorders a)."""
    lo = 0
    hi = len(a) - 1
    while hi > lo:
        piv = a[(lo + hi) >> 1]
        i = lo
        j = hi
        while i <= j:
            while a[i] < piv:
                i += 1
            while a[j] > piv:
                j -= 1
            if i <= j:
                t = a[i]
                a[i] = a[j]
                a[j] = t
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            break
    return a[kth]


@njit(cache=True)
def median_inplace(a):
    """Median (mean of the middle two for even length); reorders a."""
    m = len(a)
    h = m // 2
    v = _select(a, h)
    if m % 2 == 1:
        return v
    lo = a[0]
    for i in range(1, h):
        if a[i] > lo:
            lo = a[i]
    return 0.5 * (lo + v)


@njit(cache=True)
def _residual(X, T, idx, w, b, r, buf):
    m = X.shape[1]
    for i in range(m):
        buf[i] = X[r, i]
    for j in range(idx.shape[1]):
        wj = w[b, j]
        if wj != 0.0:
            row = T[idx[b, j], r]
            for i in range(m):
                buf[i] -= wj * row[i]
    for i in range(m):
        buf[i] = abs(buf[i])


@njit(cache=True)
def sketch_medians(X, T, idx, w):
    """(R, B) medians of |X[r] - sum_j w[b, j] T[idx[b, j], r]| over the m rows.

    X is the (R, m) sketch of x and T the (points, R, m) table of unit-mass
    sketches, so entry (r, b) is pipeline r's raw estimate for candidate b."""
    R, m = X.shape
    B = idx.shape[0]
    out = np.empty((R, B))
    buf = np.empty(m)
    for b in range(B):
        for r in range(R):
            _residual(X, T, idx, w, b, r, buf)
            out[r, b] = median_inplace(buf)
    return out


@njit(cache=True)
def sketch_argmin(X, T, idx, w, best):
    """Scan candidates in order, fully evaluating only those that can still win.

    ``best`` is the smallest median-over-pipelines value known so far (inf if
    none).  A pipeline's row median exceeds t exactly when at most (m-1)//2 rows
    are <= t, and the median over R pipelines exceeds t once R//2 + 1 pipelines
    do, so such candidates are strictly worse than ``best`` and are skipped.
    Returns (values, bounds): values[b] is the exact median-over-pipelines or
    nan if skipped, in which case the true value is > bounds[b].
    """
    R, m = X.shape
    B = idx.shape[0]
    need = R // 2 + 1
    low = (m - 1) // 2
    vals = np.full(B, np.nan)
    lbs = np.full(B, np.nan)
    buf = np.empty(m)
    raw = np.empty(R)
    for b in range(B):
        pruned = False
        if best < np.inf:
            over = 0
            for r in range(R):
                _residual(X, T, idx, w, b, r, buf)
                cnt = 0
                for i in range(m):
                    if buf[i] <= best:
                        cnt += 1
                if cnt <= low:
                    over += 1
                    if over >= need:
                        pruned = True
                        break
                elif over + (R - 1 - r) < need:
                    break
        if pruned:
            lbs[b] = best
            continue
        for r in range(R):
            _residual(X, T, idx, w, b, r, buf)
            raw[r] = median_inplace(buf)
        v = median_inplace(raw)
        vals[b] = v
        if v < best:
            best = v
    return vals, lbs


@njit(cache=True)
def ball_dist(c, radius, perm, pos, start, end, left, right, lo, hi, C, U0, F):
    """All members within radius of member c: (indices sorted, distances)."""
    tol = radius + 1e-12
    nf = F.shape[1]
    a = pos[c]
    leaves = np.empty(len(left), np.int64)
    nl = _leaves_near(F[a], tol, left, right, lo, hi, leaves, np.empty(0))
    tot = 0
    for g in range(nl):
        tot += end[leaves[g]] - start[leaves[g]]
    out = np.empty(tot, np.int64)
    dist = np.empty(tot)
    n = 0
    for g in range(nl):
        for j in range(start[leaves[g]], end[leaves[g]]):
            ok = True
            for f in range(nf):
                if abs(F[j, f] - F[a, f]) > tol:
                    ok = False
                    break
            if ok:
                d = _d22(C[a], U0[a], C[j], U0[j])
                if d <= tol:
                    out[n] = perm[j]
                    dist[n] = d
                    n += 1
    order = np.argsort(out[:n])
    return out[:n][order], dist[:n][order]
