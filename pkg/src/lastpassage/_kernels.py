"""Compiled inner loops.

Windows are dense ``(N, N)`` float64 arrays ``v`` with ``v[a, b]`` the weight
of edge ``(lo + a, lo + b)`` for ``a < b``; entries on or below the diagonal
are never read.  ``-inf`` encodes a missing edge.
"""

import numpy as np
from numba import njit

NEG = -np.inf


@njit(cache=True)
def forward_max(v, o, stop, positive):
    """w[o + d] for d = 0..stop-o: max path weight from o, optionally positive edges only."""
    m = stop - o + 1
    w = np.full(m, NEG)
    w[0] = 0.0
    for d in range(1, m):
        k = o + d
        best = NEG
        for e in range(d):
            x = v[o + e, k]
            if positive and not x > 0.0:
                continue
            if positive and e > 0 and w[e] == NEG:
                continue
            c = w[e] + x
            if c > best:
                best = c
        w[d] = best
    return w


@njit(cache=True)
def backward_max(v, t, start, positive):
    """w[d] = max path weight from t - d to t for d = 0..t-start."""
    m = t - start + 1
    w = np.full(m, NEG)
    w[0] = 0.0
    for d in range(1, m):
        j = t - d
        best = NEG
        for e in range(d):
            x = v[j, t - e]
            if positive and not x > 0.0:
                continue
            if positive and e > 0 and w[e] == NEG:
                continue
            c = x + w[e]
            if c > best:
                best = c
        w[d] = best
    return w


@njit(cache=True)
def forward_argmax(v, o, stop):
    """Forward DP with predecessor table; ties go to the smallest predecessor."""
    m = stop - o + 1
    w = np.full(m, NEG)
    pred = np.full(m, -1, dtype=np.int64)
    w[0] = 0.0
    for d in range(1, m):
        k = o + d
        best = NEG
        arg = -1
        for e in range(d):
            c = w[e] + v[o + e, k]
            if c > best:
                best = c
                arg = e
        w[d] = best
        pred[d] = arg
    return w, pred


@njit(cache=True)
def forward_length(v, o, stop):
    """Maximal edge count over finite-weight paths from o; -1 marks no path."""
    m = stop - o + 1
    L = np.full(m, -1, dtype=np.int64)
    L[0] = 0
    for d in range(1, m):
        k = o + d
        best = -1
        for e in range(d):
            if L[e] >= 0 and v[o + e, k] > NEG:
                c = L[e] + 1
                if c > best:
                    best = c
        L[d] = best
    return L


@njit(cache=True)
def w0n_from_column_edges(edges, n):
    """w_{0,k} for k = 0..n from edges laid out column by column.

    Edge (m, k) sits at index k*(k-1)/2 + m, the order in which windows are
    sampled, so the measurement phase never materializes a matrix.
    """
    w = np.full(n + 1, NEG)
    w[0] = 0.0
    for k in range(1, n + 1):
        base = k * (k - 1) // 2
        best = NEG
        for m in range(k):
            c = w[m] + edges[base + m]
            if c > best:
                best = c
        w[k] = best
    return w


@njit(cache=True)
def reach_bitsets(v, positive):
    """Row j holds the set of vertices reachable from j (j itself included)."""
    N = v.shape[0]
    words = (N + 63) // 64
    R = np.zeros((N, words), dtype=np.uint64)
    for j in range(N - 1, -1, -1):
        R[j, j // 64] |= np.uint64(1) << np.uint64(j % 64)
        for k in range(j + 1, N):
            x = v[j, k]
            ok = x > 0.0 if positive else x > NEG
            if ok:
                for q in range(k // 64, words):
                    R[j, q] |= R[k, q]
    return R


@njit(cache=True)
def skeleton_mask(v, margin, positive):
    """Window-truncated skeleton test for every vertex index in the interior.

    x qualifies iff every j < x reaches x and x reaches every k > x, using
    finite edges (or strictly positive edges when ``positive``).
    """
    N = v.shape[0]
    R = reach_bitsets(v, positive)
    out = np.zeros(N, dtype=np.bool_)
    for x in range(margin, N - margin):
        good = True
        for j in range(x):
            if (R[j, x // 64] >> np.uint64(x % 64)) & np.uint64(1) == 0:
                good = False
                break
        if good:
            for k in range(x + 1, N):
                if (R[x, k // 64] >> np.uint64(k % 64)) & np.uint64(1) == 0:
                    good = False
                    break
        out[x] = good
    return out


@njit(cache=True)
def _grows(w, c, H):
    for i in range(1, H + 1):
        if not w[i] >= c * i:
            return False
    return True


@njit(cache=True)
def event_flags(v, x, H, c1, c2):
    """(Al, A0, Ar, Al+, A0+, Ar+) at vertex index x, intersections cut at depth H."""
    a0 = True
    for j in range(1, H + 1):
        for i in range(1, H + 1):
            if not v[x - j, x + i] < c2 * (j + i):
                a0 = False
                break
        if not a0:
            break
    ar = _grows(forward_max(v, x, x + H, False), c1, H)
    al = _grows(backward_max(v, x, x - H, False), c1, H)
    arp = _grows(forward_max(v, x, x + H, True), c1, H)
    alp = _grows(backward_max(v, x, x - H, True), c1, H)
    return al, a0, ar, alp, a0, arp


@njit(cache=True)
def renewal_masks(v, margin, H, c1, c2):
    """Renewal and renewal-plus indicators on the interior; short-circuits on A0."""
    N = v.shape[0]
    ren = np.zeros(N, dtype=np.bool_)
    renp = np.zeros(N, dtype=np.bool_)
    for x in range(margin, N - margin):
        a0 = True
        for j in range(1, H + 1):
            for i in range(1, H + 1):
                if not v[x - j, x + i] < c2 * (j + i):
                    a0 = False
                    break
            if not a0:
                break
        if not a0:
            continue
        if not _grows(forward_max(v, x, x + H, False), c1, H):
            continue
        if not _grows(backward_max(v, x, x - H, False), c1, H):
            continue
        ren[x] = True
        if _grows(forward_max(v, x, x + H, True), c1, H) and _grows(
            backward_max(v, x, x - H, True), c1, H
        ):
            renp[x] = True
    return ren, renp


@njit(cache=True)
def map_uniforms(u, cum, values, los, his, shift, scale, arithmetic):
    """Weights from uniforms; segment m of ``cum`` is table entry / component m."""
    out = np.empty(u.shape[0])
    last = cum.shape[0] - 2
    for t in range(u.shape[0]):
        x = u[t]
        if x < cum[0]:
            out[t] = NEG
            continue
        m = 0
        while m < last and cum[m + 1] <= x:
            m += 1
        if arithmetic:
            out[t] = values[m]
        else:
            s = (x - cum[m]) / (cum[m + 1] - cum[m])
            out[t] = shift + scale * (los[m] + (his[m] - los[m]) * s)
    return out


@njit(cache=True)
def w0n_from_uniforms(u, n, cum, values, los, his, shift, scale, arithmetic):
    return w0n_from_column_edges(
        map_uniforms(u, cum, values, los, his, shift, scale, arithmetic), n
    )


@njit(cache=True)
def column_edges_to_matrix(edges, N):
    v = np.full((N, N), NEG)
    t = 0
    for k in range(1, N):
        for j in range(k):
            v[j, k] = edges[t]
            t += 1
    return v
