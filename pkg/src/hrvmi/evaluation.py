"""Evaluation protocol: holdout split, stratified CV, metrics, ROC and the feature-set benchmark."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FoldDegenerate, InvalidParams, SingleClass, TooSmall
from .features import FeatureMatrix, FeatureSetDef
from .models import ModelSpec, fit


@dataclass(frozen=True)
class EvalProtocol:
    holdout_fraction: float = 0.2
    cv_folds: int = 10
    stratified: bool = True
    split_seed: int = 42
    decision_threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.holdout_fraction < 1:
            raise InvalidParams("holdout_fraction must lie in (0, 1)")
        if self.cv_folds < 2:
            raise InvalidParams("cv_folds must be at least 2")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with MI as the positive class."""

    tp: int
    fn: int
    fp: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @classmethod
    def from_predictions(cls, labels, predicted) -> ConfusionMatrix:
        y = np.asarray(labels).astype(bool)
        p = np.asarray(predicted).astype(bool)
        return cls(int(np.sum(y & p)), int(np.sum(y & ~p)), int(np.sum(~y & p)), int(np.sum(~y & ~p)))


@dataclass
class MetricBlock:
    accuracy: float
    kappa: float | None
    auroc: float | None
    sensitivity: float | None
    specificity: float | None

    FIELDS = ("accuracy", "kappa", "auroc", "sensitivity", "specificity")

    def as_tuple(self):
        return tuple(getattr(self, f) for f in self.FIELDS)


def kappa(cm: ConfusionMatrix) -> float | None:
    """Cohen's kappa; None when chance agreement is 1."""
    n = cm.total
    if n <= 0:
        raise InvalidParams("empty confusion matrix")
    p_o = (cm.tp + cm.tn) / n
    p_e = ((cm.tp + cm.fn) * (cm.tp + cm.fp) + (cm.fp + cm.tn) * (cm.fn + cm.tn)) / (n * n)
    if p_e == 1:
        return None
    return (p_o - p_e) / (1 - p_e)


def roc_auroc(labels, scores) -> tuple[list[tuple[float, float, float]], float]:
    """ROC points ``(threshold, fpr, tpr)`` over distinct scores and the trapezoidal area.

    Tied scores move the curve in one diagonal step, which credits each
    tied positive/negative pair with one half.
    """
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s) - 1]
    tp = np.cumsum(y_sorted)[last]
    fp = (last + 1) - tp
    tpr = np.r_[0, tp] / n_pos
    fpr = np.r_[0, fp] / n_neg
    thresholds = np.r_[np.inf, s_sorted[last]]
    # integer trapezoids, normalized once
    area = float(np.sum(np.diff(np.r_[0, fp]) * (np.r_[0, tp][:-1] + np.r_[0, tp][1:]))) / (2.0 * n_pos * n_neg)
    points = list(zip(thresholds.tolist(), fpr.tolist(), tpr.tolist()))
    return points, area


def metric_block(labels, scores, threshold: float = 0.5) -> MetricBlock:
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=float)
    cm = ConfusionMatrix.from_predictions(y, s >= threshold)
    pos, neg = cm.tp + cm.fn, cm.tn + cm.fp
    try:
        auroc = roc_auroc(y, s)[1]
    except SingleClass:
        auroc = None
    return MetricBlock(
        accuracy=(cm.tp + cm.tn) / cm.total,
        kappa=kappa(cm),
        auroc=auroc,
        sensitivity=cm.tp / pos if pos else None,
        specificity=cm.tn / neg if neg else None,
    )


def derive_seed(*parts) -> int:
    key = ":".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def split_holdout(data: FeatureMatrix, protocol: EvalProtocol) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Per-class train counts ``round(n_c * (1 - holdout))``, rows shuffled by the split seed."""
    rng = np.random.default_rng(derive_seed("holdout", protocol.split_seed))
    y = data.labels
    train_idx, test_idx = [], []
    groups = [np.flatnonzero(y == c) for c in (0, 1)] if protocol.stratified else [np.arange(len(y))]
    for members in groups:
        members = rng.permutation(members)
        k = _round_half_up(len(members) * (1 - protocol.holdout_fraction))
        train_idx.append(members[:k])
        test_idx.append(members[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    counts = np.bincount(y[train_idx], minlength=2)
    if counts.min() < protocol.cv_folds:
        raise TooSmall(
            f"training portion has {counts.tolist()} rows per class; "
            f"each class needs at least cv_folds={protocol.cv_folds} (lower holdout_fraction or cv_folds)"
        )
    return data.take(train_idx), data.take(test_idx)


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold id per row; class members are dealt round-robin after a seeded shuffle."""
    y = np.asarray(labels)
    rng = np.random.default_rng(derive_seed("folds", seed))
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in np.unique(y)])
    folds = np.empty(len(y), dtype=int)
    folds[order] = np.arange(len(order)) % k
    return folds


@dataclass
class CVResult:
    pooled: MetricBlock
    folds: list[MetricBlock]
    oof_scores: np.ndarray

    def fold_sd(self) -> dict[str, float | None]:
        out = {}
        for f in MetricBlock.FIELDS:
            vals = [getattr(b, f) for b in self.folds if getattr(b, f) is not None]
            out[f] = float(np.std(vals, ddof=1)) if len(vals) >= 2 else None
        return out


def cross_validate(spec: ModelSpec, data: FeatureMatrix, protocol: EvalProtocol, tag: str = "") -> CVResult:
    """Stratified k-fold CV; the primary block comes from pooled out-of-fold scores."""
    if protocol.stratified:
        folds = stratified_folds(data.labels, protocol.cv_folds, protocol.split_seed)
    else:
        rng = np.random.default_rng(derive_seed("folds", protocol.split_seed))
        folds = rng.permutation(len(data)) % protocol.cv_folds
    oof = np.empty(len(data))
    blocks = []
    for k in range(protocol.cv_folds):
        test = folds == k
        train = ~test
        if np.bincount(data.labels[train], minlength=2).min() < 2:
            raise FoldDegenerate(f"fold {k}: a class has fewer than 2 training rows")
        fold_spec = ModelSpec(spec.family, spec.hyperparameters, derive_seed(spec.train_seed, tag, "fold", k))
        model = fit(fold_spec, data.values[train], data.labels[train], data.feature_names)
        oof[test] = model.predict_proba(data.values[test])
        blocks.append(metric_block(data.labels[test], oof[test], protocol.decision_threshold))
    pooled = metric_block(data.labels, oof, protocol.decision_threshold)
    return CVResult(pooled, blocks, oof)


@dataclass
class BenchCell:
    set_name: str
    family: str
    cv: CVResult
    test: MetricBlock
    test_roc: list[tuple[float, float, float]] = field(default_factory=list)


def _run_cell(args) -> BenchCell:
    fs, spec, train, test, protocol = args
    tr, te = train.select(fs.feature_names), test.select(fs.feature_names)
    tag = f"{fs.name}/{spec.family}"
    job_seed = derive_seed(protocol.split_seed, tag)
    spec = ModelSpec(spec.family, spec.hyperparameters, job_seed)
    cv = cross_validate(spec, tr, protocol, tag)
    model = fit(spec, tr.values, tr.labels, tr.feature_names)
    scores = model.predict_proba(te.values)
    block = metric_block(te.labels, scores, protocol.decision_threshold)
    try:
        roc = roc_auroc(te.labels, scores)[0]
    except SingleClass:
        roc = []
    return BenchCell(fs.name, spec.family, cv, block, roc)


def benchmark_feature_sets(
    features: FeatureMatrix,
    sets: list[FeatureSetDef],
    specs: list[ModelSpec],
    protocol: EvalProtocol,
    jobs: int = 1,
) -> list[BenchCell]:
    """CV on the training portion plus a refit scored on the held-out portion, per (set, model).

    Every job draws its seeds from the protocol seed and its (set, model)
    key, so results do not depend on execution order or ``jobs``.
    """
    for fs in sets:
        missing = [c for c in fs.feature_names if c not in features.feature_names]
        if missing:
            raise InvalidParams(f"feature set {fs.name}: columns {missing} not in matrix")
    train, test = split_holdout(features, protocol)
    work = [(fs, spec, train, test, protocol) for fs in sets for spec in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, work))
    return [_run_cell(w) for w in work]
