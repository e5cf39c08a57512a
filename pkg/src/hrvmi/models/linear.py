"""Logistic regression, linear discriminant analysis and a linear SVM."""

from __future__ import annotations

import numba as nb
import numpy as np
from scipy.special import expit

from ..errors import SingularCovariance


def _penalized_loglik(A, y, beta, ridge):
    eta = A @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * beta[1:] @ beta[1:])


def fit_logistic(Z, y, hp, rng):
    """Iteratively reweighted least squares with a small ridge on the slopes."""
    ridge = float(hp["ridge"])
    A = np.column_stack([np.ones(len(Z)), Z])
    beta = np.zeros(A.shape[1])
    penalty = np.full(A.shape[1], ridge)
    penalty[0] = 0.0
    ll = _penalized_loglik(A, y, beta, ridge)
    for _ in range(int(hp["max_iter"])):
        p = expit(A @ beta)
        w = p * (1 - p)
        H = A.T @ (A * w[:, None]) + np.diag(penalty) + 1e-12 * np.eye(A.shape[1])
        g = A.T @ (y - p) - penalty * beta
        step = np.linalg.solve(H, g)
        t = 1.0
        while t > 1e-8:
            cand = beta + t * step
            ll_new = _penalized_loglik(A, y, cand, ridge)
            if ll_new >= ll - 1e-12:
                break
            t *= 0.5
        if t <= 1e-8:
            break
        beta, ll_old, ll = cand, ll, ll_new
        if np.max(np.abs(t * step)) < 1e-8 or abs(ll - ll_old) < 1e-12:
            break
    return {"intercept": float(beta[0]), "coef": beta[1:]}


def score_logistic(params, Z):
    return expit(Z @ params["coef"] + params["intercept"])


def fit_lda(Z, y, hp, rng):
    """Pooled-covariance LDA with diagonal loading; priors from class frequencies."""
    Z0, Z1 = Z[y == 0], Z[y == 1]
    mu0, mu1 = Z0.mean(axis=0), Z1.mean(axis=0)
    resid = np.vstack([Z0 - mu0, Z1 - mu1])
    dof = max(len(Z) - 2, 1)
    cov = resid.T @ resid / dof + float(hp["loading"]) * np.eye(Z.shape[1])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovariance("pooled covariance not positive definite after loading") from None
    w = np.linalg.solve(chol.T, np.linalg.solve(chol, mu1 - mu0))
    if not np.all(np.isfinite(w)):
        raise SingularCovariance("non-finite discriminant direction")
    prior = np.log(len(Z1) / len(Z0))
    b = -0.5 * (mu0 + mu1) @ w + prior
    return {"coef": w, "intercept": float(b)}


score_lda = score_logistic


@nb.njit(cache=True)
def _pegasos(A, s, lam, order):
    """Pegasos with projection; returns the average of the second-half iterates."""
    n_iter = order.shape[0]
    d = A.shape[1]
    w = np.zeros(d)
    avg = np.zeros(d)
    n_avg = 0
    radius = 1.0 / np.sqrt(lam)
    for t in range(1, n_iter + 1):
        i = order[t - 1]
        eta = 1.0 / (lam * t)
        margin = 0.0
        for k in range(d):
            margin += w[k] * A[i, k]
        for k in range(d):
            w[k] *= 1.0 - eta * lam
        if s[i] * margin < 1.0:
            for k in range(d):
                w[k] += eta * s[i] * A[i, k]
        norm = 0.0
        for k in range(d):
            norm += w[k] * w[k]
        norm = np.sqrt(norm)
        if norm > radius:
            for k in range(d):
                w[k] *= radius / norm
        if 2 * t > n_iter:
            for k in range(d):
                avg[k] += w[k]
            n_avg += 1
    return avg / n_avg


def platt(f, y, max_iter=100):
    """Fit ``P(y=1|f) = 1 / (1 + exp(a f + b))`` with Platt's smoothed targets."""
    n1 = float(np.sum(y == 1))
    n0 = float(len(y) - n1)
    t = np.where(y == 1, (n1 + 1) / (n1 + 2), 1 / (n0 + 2))
    a, b = 0.0, np.log((n0 + 1) / (n1 + 1))

    def objective(a, b):
        z = a * f + b
        # -sum t log p + (1-t) log(1-p) with p = 1/(1+exp(z))
        return float(np.sum(t * np.logaddexp(0, z) + (1 - t) * np.logaddexp(0, -z)))

    obj = objective(a, b)
    for _ in range(max_iter):
        p = expit(-(a * f + b))
        d1 = t - p
        d2 = p * (1 - p)
        g = np.array([np.sum(f * d1), np.sum(d1)])
        H = np.array([[np.sum(f * f * d2), np.sum(f * d2)], [np.sum(f * d2), np.sum(d2)]]) + 1e-12 * np.eye(2)
        if np.max(np.abs(g)) < 1e-10:
            break
        step = np.linalg.solve(H, -g)
        lr = 1.0
        while lr > 1e-10:
            na, nb_ = a + lr * step[0], b + lr * step[1]
            new = objective(na, nb_)
            if new < obj + 1e-4 * lr * (g @ step):
                break
            lr *= 0.5
        if lr <= 1e-10:
            break
        a, b, obj = na, nb_, new
    return float(a), float(b)


def fit_svm(Z, y, hp, rng):
    """Linear soft-margin SVM by seeded stochastic subgradient descent plus a Platt sigmoid."""
    n = len(Z)
    A = np.column_stack([Z, np.ones(n)])
    s = np.where(y == 1, 1.0, -1.0)
    lam = 1.0 / (float(hp["C"]) * n)
    order = rng.integers(0, n, size=int(hp["epochs"]) * n)
    w = _pegasos(A, s, lam, order)
    margin = A @ w
    a, b = platt(margin, y)
    return {"coef": w[:-1], "intercept": float(w[-1]), "platt_a": a, "platt_b": b}


def svm_margin(params, Z):
    return Z @ params["coef"] + params["intercept"]


def score_svm(params, Z):
    return expit(-(params["platt_a"] * svm_margin(params, Z) + params["platt_b"]))
