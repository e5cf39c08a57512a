"""Tree families: random forest, stochastic gradient boosting and a C5.0-style tree."""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from scipy.stats import beta as beta_dist

from ._tree import grow_tree, leaf_values, pack

_NO_LIMIT = 1 << 30


def _seed(rng) -> int:
    return int(rng.integers(0, 2**63 - 1))


# -- random forest -----------------------------------------------------------


def fit_random_forest(Z, y, hp, rng):
    n, p = Z.shape
    yf = y.astype(float)
    mtry = hp.get("max_features") or max(1, int(np.floor(np.sqrt(p))))
    trees = []
    oob_sum = np.zeros(n)
    oob_n = np.zeros(n)
    for _ in range(int(hp["n_trees"])):
        idx = rng.integers(0, n, size=n)
        tree = grow_tree(Z, yf, idx, _NO_LIMIT, int(hp["min_samples_leaf"]), int(mtry), _seed(rng))
        trees.append(tree[:5])
        out = np.ones(n, dtype=bool)
        out[idx] = False
        if out.any():
            one = pack([tree[:5]])
            oob_sum[out] += leaf_values(one, Z[out])[:, 0]
            oob_n[out] += 1
    params = pack(trees)
    seen = oob_n > 0
    params["oob_accuracy"] = float(np.mean((oob_sum[seen] / oob_n[seen] >= 0.5) == y[seen])) if seen.any() else float("nan")
    return params


def score_random_forest(params, Z):
    return leaf_values(params, Z).mean(axis=1)


# -- stochastic gradient boosting --------------------------------------------


def _logloss(y, F):
    return np.logaddexp(0.0, F) - y * F


def _stratified_subsample(y, frac, rng):
    if frac >= 1.0:
        return np.arange(len(y))
    parts = []
    for c in (0, 1):
        members = np.flatnonzero(y == c)
        k = max(1, int(round(frac * len(members))))
        parts.append(rng.choice(members, size=k, replace=False))
    return np.sort(np.concatenate(parts))


def fit_boosting(Z, y, hp, rng):
    """Logistic-loss boosting of depth-limited regression trees.

    Leaf values are shrunken Newton steps on the in-bag rows, halved
    until they do not increase the in-bag loss of that leaf.
    """
    yf = y.astype(float)
    prior = np.clip(yf.mean(), 1e-6, 1 - 1e-6)
    init = float(np.log(prior / (1 - prior)))
    F = np.full(len(y), init)
    shrink = float(hp["shrinkage"])
    trees, losses = [], []
    for _ in range(int(hp["n_rounds"])):
        idx = _stratified_subsample(y, float(hp["subsample"]), rng)
        resid = yf - expit(F)
        feat, thr, left, right, _, leaf_pos = grow_tree(
            Z, resid, idx, int(hp["max_depth"]), int(hp["min_samples_leaf"]), Z.shape[1], _seed(rng)
        )
        value = np.zeros(len(feat))
        for leaf in np.unique(leaf_pos):
            rows = idx[leaf_pos == leaf]
            p = expit(F[rows])
            hess = np.sum(p * (1 - p))
            gamma = shrink * np.sum(yf[rows] - p) / max(hess, 1e-12)
            base = np.sum(_logloss(yf[rows], F[rows]))
            while abs(gamma) > 1e-12 and np.sum(_logloss(yf[rows], F[rows] + gamma)) > base:
                gamma *= 0.5
            value[leaf] = gamma
        tree = (feat, thr, left, right, value)
        trees.append(tree)
        F = F + leaf_values(pack([tree]), Z)[:, 0]
        losses.append(float(np.mean(_logloss(yf, F))))
    params = pack(trees)
    params["init"] = init
    params["train_loss"] = np.asarray(losses)
    return params


def score_boosting(params, Z):
    return expit(params["init"] + leaf_values(params, Z).sum(axis=1))


# -- C5.0-style single tree --------------------------------------------------


def _entropy(n1, n):
    p = np.divide(n1, n, out=np.zeros_like(n1, dtype=float), where=n > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(p < 1, (1 - p) * np.log2(1 - p), 0.0))
    return h


def _best_gain_split(x, y, min_cases):
    """Best binary threshold on one feature: (gain, gain_ratio, threshold) or None."""
    order = np.argsort(x, kind="mergesort")
    xs, ys = x[order], y[order]
    n = len(xs)
    n_left = np.arange(1, n)
    c1 = np.cumsum(ys)[:-1]
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_cases) & (n - n_left >= min_cases)
    if not valid.any():
        return None
    total1 = ys.sum()
    h_parent = _entropy(np.array([total1]), np.array([n]))[0]
    h_left = _entropy(c1, n_left)
    h_right = _entropy(total1 - c1, n - n_left)
    gain = h_parent - (n_left * h_left + (n - n_left) * h_right) / n
    # continuous-attribute threshold penalty
    n_distinct = len(np.unique(xs))
    gain = gain - np.log2(max(n_distinct - 1, 1)) / n
    gain = np.where(valid, gain, -np.inf)
    i = int(np.argmax(gain))
    if gain[i] <= 0:
        return None
    fl = n_left[i] / n
    split_info = -(fl * np.log2(fl) + (1 - fl) * np.log2(1 - fl))
    thr = 0.5 * (xs[i] + xs[i + 1])
    if thr >= xs[i + 1]:
        thr = xs[i]
    return float(gain[i]), float(gain[i] / split_info), float(thr)


def _added_errors(n, e, cf):
    """Pessimistic error count: n times the upper confidence limit of e/n."""
    if e >= n:
        return float(n)
    return float(n * beta_dist.ppf(1 - cf, e + 1, n - e))


class _C50Builder:
    def __init__(self, Z, y, min_cases, cf):
        self.Z, self.y, self.min_cases, self.cf = Z, y, min_cases, cf
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _new(self):
        for lst, v in ((self.feature, -1), (self.threshold, 0.0), (self.left, -1), (self.right, -1), (self.value, 0.0)):
            lst.append(v)
        return len(self.feature) - 1

    def build(self, rows):
        """Grow and prune; returns (node id, pessimistic error estimate)."""
        node = self._new()
        y = self.y[rows]
        n, n1 = len(y), int(y.sum())
        self.value[node] = n1 / n
        leaf_err = _added_errors(n, min(n1, n - n1), self.cf)
        if n1 == 0 or n1 == n or n < 2 * self.min_cases:
            return node, leaf_err
        cands = []
        for f in range(self.Z.shape[1]):
            res = _best_gain_split(self.Z[rows, f], y, self.min_cases)
            if res is not None:
                cands.append((f, *res))
        if not cands:
            return node, leaf_err
        mean_gain = np.mean([c[1] for c in cands])
        eligible = [c for c in cands if c[1] >= mean_gain - 1e-12]
        f, _, _, thr = max(eligible, key=lambda c: c[2])
        go_left = self.Z[rows, f] <= thr
        lnode, lerr = self.build(rows[go_left])
        rnode, rerr = self.build(rows[~go_left])
        if leaf_err <= lerr + rerr + 0.1:
            # collapse: discard the children
            del self.feature[node + 1 :], self.threshold[node + 1 :], self.left[node + 1 :]
            del self.right[node + 1 :], self.value[node + 1 :]
            return node, leaf_err
        self.feature[node], self.threshold[node] = f, thr
        self.left[node], self.right[node] = lnode, rnode
        return node, lerr + rerr


def fit_c50(Z, y, hp, rng):
    b = _C50Builder(Z, y.astype(int), int(hp["min_cases"]), float(hp["confidence"]))
    b.build(np.arange(len(y)))
    tree = (
        np.asarray(b.feature, dtype=np.int64),
        np.asarray(b.threshold, dtype=float),
        np.asarray(b.left, dtype=np.int64),
        np.asarray(b.right, dtype=np.int64),
        np.asarray(b.value, dtype=float),
    )
    return pack([tree])


def score_c50(params, Z):
    return leaf_values(params, Z)[:, 0]
