"""k-nearest neighbours and Gaussian naive Bayes."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.special import expit


def fit_knn(Z, y, hp, rng):
    return {"train_z": np.array(Z, dtype=float), "train_y": np.array(y, dtype=float), "k": int(hp["k"])}


def knn_neighbors(train_z, query, k):
    """Training rows within the k-th smallest distance, nearest first.

    Returns ``(index, rank)``. Rows tied with the k-th distance are all kept,
    so the vote can hold more than ``k`` rows; tied rows share their mid-rank.
    """
    d2 = np.sum((train_z - query) ** 2, axis=1)
    k = min(k, len(d2))
    order = np.argsort(d2, kind="stable")
    kth = d2[order[k - 1]]
    idx = order[d2[order] <= kth]
    dist = d2[idx]
    first = np.searchsorted(dist, dist, side="left")
    last = np.searchsorted(dist, dist, side="right")
    return idx, (first + last + 1) / 2.0


def knn_score(labels_in_rank_order, ranks=None) -> float:
    """MI fraction among the neighbours.

    An exact 50/50 vote is resolved by the inverse-rank weighted MI share,
    which keeps the score on the side of the closer neighbours. The share is
    computed in exact rationals and rounded once, so it does not depend on
    summation order.
    """
    lab = [int(v) for v in labels_in_rank_order]
    if 2 * sum(lab) != len(lab):
        return sum(lab) / len(lab)
    ranks = range(1, len(lab) + 1) if ranks is None else ranks
    w = [1 / Fraction(float(r)) for r in ranks]
    return float(sum(wi for wi, v in zip(w, lab) if v) / sum(w))


def score_knn(params, Z):
    tz, ty, k = params["train_z"], params["train_y"], int(params["k"])
    out = np.empty(len(Z))
    for i, q in enumerate(Z):
        idx, rank = knn_neighbors(tz, q, k)
        out[i] = knn_score(ty[idx], rank)
    return out


def fit_naive_bayes(Z, y, hp, rng):
    floor = float(hp["var_floor"])
    out = {}
    for c in (0, 1):
        Zc = Z[y == c]
        out[f"mean{c}"] = Zc.mean(axis=0)
        out[f"var{c}"] = np.maximum(Zc.var(axis=0), floor)
        out[f"logprior{c}"] = float(np.log(len(Zc) / len(Z)))
    return out


def _class_loglik(params, Z, c):
    m, v = params[f"mean{c}"], params[f"var{c}"]
    return params[f"logprior{c}"] - 0.5 * np.sum(np.log(2 * np.pi * v) + (Z - m) ** 2 / v, axis=1)


def score_naive_bayes(params, Z):
    return expit(_class_loglik(params, Z, 1) - _class_loglik(params, Z, 0))
