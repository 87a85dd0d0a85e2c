"""Compiled CART kernels for the regression forest.

Trees are stored as five parallel arrays (feature, threshold, left, right,
value); ``feature == -1`` marks a leaf.  Randomness enters only through the
``keys`` matrix, one row of uniforms per node id, so a tree depends on its
inputs alone and can be grown on any thread.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def grow_tree(X, y, rows, keys, mtry, min_leaf):
    """Greedy least-squares tree on ``X[rows]``.

    The per-column presort is done by numpy (much faster than the compiled
    argsort); the recursion runs in ``_grow``.
    """
    xc = np.ascontiguousarray(X[rows].T)
    order = np.argsort(xc, axis=1).astype(np.int32)
    ys = np.ascontiguousarray(y[rows])
    return _grow(xc, ys, order, keys, mtry, min_leaf)


@njit(cache=True, nogil=True)
def _grow(xc, ys, order, keys, mtry, min_leaf):
    """Tree recursion over presorted sample ids.

    A candidate split needs ``min_leaf`` rows on each side; a node is not
    split when it holds fewer than ``2 * min_leaf`` rows, all its responses are
    equal (the leaf then stores that value exactly) or no split reduces
    the sum of squares.  Ties go to the lowest column, then the lowest
    threshold.  Every column keeps its samples presorted; splits partition
    those lists stably so no node re-sorts.
    """
    p, n = xc.shape
    cap = max(2 * n, 1)
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    # order[f, start:end] holds a node's sample ids sorted by column f
    order = order.copy()
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int32)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    st_start[0] = 0
    st_end[0] = n
    st_node[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        node = st_node[top]
        m = end - start
        s = 0.0
        y0 = ys[order[0, start]]
        pure = True
        for i in range(start, end):
            yi = ys[order[0, i]]
            s += yi
            if yi != y0:
                pure = False
        mean = y0 if pure else s / m
        value[node] = mean
        if pure or m < 2 * min_leaf:
            continue
        sst = 0.0
        for i in range(start, end):
            d = ys[order[0, i]] - mean
            sst += d * d
        if sst <= 0.0:
            continue

        cand = np.sort(np.argsort(keys[node, :p])[:mtry])
        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        for cf in range(mtry):
            f = cand[cf]
            sl = 0.0
            for i in range(start, end - min_leaf):
                k = order[f, i]
                sl += ys[k] - mean
                nl = i - start + 1
                if nl < min_leaf:
                    continue
                a = xc[f, k]
                b = xc[f, order[f, i + 1]]
                if a == b:
                    continue
                nr = m - nl
                gain = sl * sl / nl + sl * sl / nr
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    t = a + 0.5 * (b - a)
                    if not (t < b):
                        t = a
                    best_t = t
        if best_f < 0 or best_gain <= 1e-12 * sst:
            continue

        nl = 0
        for i in range(start, end):
            k = order[best_f, i]
            gl = xc[best_f, k] <= best_t
            goes_left[k] = gl
            if gl:
                nl += 1
        # children that cannot split again only need column 0 (for their mean)
        n_part = p if (nl >= 2 * min_leaf or m - nl >= 2 * min_leaf) else 1
        for f in range(n_part):
            li = 0
            ri = nl
            for i in range(start, end):
                k = order[f, i]
                if goes_left[k]:
                    buf[li] = k
                    li += 1
                else:
                    buf[ri] = k
                    ri += 1
            for i in range(m):
                order[f, start + i] = buf[i]

        feat[node] = best_f
        thr[node] = best_t
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        st_start[top] = start + nl
        st_end[top] = end
        st_node[top] = rc
        top += 1
        st_start[top] = start
        st_end[top] = start + nl
        st_node[top] = lc
        top += 1

    return feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(), right[:n_nodes].copy(), \
        value[:n_nodes].copy()


@njit(cache=True, nogil=True)
def predict_tree(feat, thr, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        k = 0
        while feat[k] >= 0:
            if X[i, feat[k]] <= thr[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = value[k]
    return out


@njit(cache=True, nogil=True)
def apply_tree(feat, thr, left, right, X):
    """Leaf node id reached by every row of ``X``."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        k = 0
        while feat[k] >= 0:
            if X[i, feat[k]] <= thr[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = k
    return out
