"""Array-based binary trees grown by variance reduction (numba kernels).

For 0/1 targets, variance reduction is the same criterion as Gini
impurity decrease, so one kernel serves classification forests and the
regression trees inside gradient boosting.

A tree is five parallel arrays: ``feature`` (-1 for leaves),
``threshold`` (go left when ``x <= threshold``), ``left``, ``right`` and
``value``.
"""

from __future__ import annotations

import numba as nb
import numpy as np

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@nb.njit(cache=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return state, z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _best_split(X, y, idx, start, end, feats, n_try, min_leaf):
    n = end - start
    total = 0.0
    for i in range(start, end):
        total += y[idx[i]]
    parent = total * total / n
    best_gain = 1e-12 * (abs(parent) + 1.0)
    best_f = -1
    best_thr = 0.0
    vals = np.empty(n)
    ys = np.empty(n)
    for t in range(n_try):
        f = feats[t]
        for i in range(n):
            vals[i] = X[idx[start + i], f]
        order = np.argsort(vals, kind="mergesort")
        for i in range(n):
            ys[i] = y[idx[start + order[i]]]
        s_left = 0.0
        for i in range(n - 1):
            s_left += ys[i]
            n_left = i + 1
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            v0 = vals[order[i]]
            v1 = vals[order[i + 1]]
            if v0 == v1:
                continue
            s_right = total - s_left
            gain = s_left * s_left / n_left + s_right * s_right / (n - n_left) - parent
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = 0.5 * (v0 + v1)
                if thr >= v1:
                    thr = v0
                best_thr = thr
    return best_f, best_thr


@nb.njit(cache=True)
def grow_tree(X, y, idx, max_depth, min_leaf, max_features, seed):
    """Grow one tree on rows ``idx`` (duplicates allowed, e.g. a bootstrap).

    Returns the tree arrays plus ``leaf_of``: the leaf reached by each
    entry of ``idx`` (in the original order of ``idx``).
    """
    n = idx.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    work = idx.copy()
    pos = np.arange(n)  # position in idx of each entry of work
    leaf_pos = np.zeros(n, dtype=np.int64)
    feats = np.arange(p)
    state = np.uint64(seed)
    n_try = min(max_features, p)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start
        s = 0.0
        lo = y[work[start]]
        hi = lo
        for i in range(start, end):
            v = y[work[i]]
            s += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        value[node] = s / m
        if depth >= max_depth or m < 2 * min_leaf or hi == lo:
            for i in range(start, end):
                leaf_pos[pos[i]] = node
            continue
        # partial Fisher-Yates: first n_try entries of feats are the sample
        for t in range(n_try):
            state, r = _splitmix(state)
            j = t + np.int64(r % np.uint64(p - t))
            tmp = feats[t]
            feats[t] = feats[j]
            feats[j] = tmp
        f, thr = _best_split(X, y, work, start, end, feats, n_try, min_leaf)
        if f < 0:
            for i in range(start, end):
                leaf_pos[pos[i]] = node
            continue
        # in-place partition of work[start:end]
        i = start
        j = end - 1
        while i <= j:
            if X[work[i], f] <= thr:
                i += 1
            else:
                tw = work[i]
                work[i] = work[j]
                work[j] = tw
                tp = pos[i]
                pos[i] = pos[j]
                pos[j] = tp
                j -= 1
        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes + 1
        stack_start[top] = i
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes
        stack_start[top] = start
        stack_end[top] = i
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        leaf_pos,
    )


@nb.njit(cache=True)
def apply_trees(X, feature, threshold, left, right, offsets):
    """Leaf index (global, into the packed arrays) per row and tree."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n, n_trees), dtype=np.int64)
    for t in range(n_trees):
        base = offsets[t]
        for r in range(n):
            node = 0
            while feature[base + node] >= 0:
                if X[r, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            out[r, t] = base + node
    return out


def pack(trees):
    """Concatenate per-tree arrays; child links stay tree-local."""
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(t[0]) for t in trees])
    cat = [np.concatenate([t[k] for t in trees]) for k in range(5)]
    return {
        "feature": cat[0].astype(np.int64),
        "threshold": cat[1].astype(float),
        "left": cat[2].astype(np.int64),
        "right": cat[3].astype(np.int64),
        "value": cat[4].astype(float),
        "offsets": offsets,
    }


def leaf_values(params, X) -> np.ndarray:
    """``value`` of the reached leaf, shape (rows, trees)."""
    leaves = apply_trees(
        np.ascontiguousarray(X, dtype=float),
        params["feature"],
        params["threshold"],
        params["left"],
        params["right"],
        params["offsets"],
    )
    return params["value"][leaves]
