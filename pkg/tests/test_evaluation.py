import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrvmi.errors import InvalidParams, SingleClass, TooSmall
from hrvmi.evaluation import (
    ConfusionMatrix,
    EvalProtocol,
    benchmark_feature_sets,
    cross_validate,
    kappa,
    metric_block,
    roc_auroc,
    split_holdout,
    stratified_folds,
)
from hrvmi.features import FEATURE_SETS, FeatureMatrix, FeatureSetDef
from hrvmi.models import FAMILIES, ModelSpec


def matrix(X, y):
    return FeatureMatrix([f"r{i}" for i in range(len(y))], [f"f{j}" for j in range(X.shape[1])], X, y)


def mann_whitney(y, s):
    pos, neg = s[y == 1], s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (len(pos) * len(neg))


# -- metrics -------------------------------------------------------------------


def test_kappa_examples():
    assert kappa(ConfusionMatrix(20, 5, 3, 22)) == pytest.approx(0.68, abs=1e-12)
    assert kappa(ConfusionMatrix(25, 0, 0, 25)) == 1.0
    assert kappa(ConfusionMatrix(10, 10, 10, 10)) == 0.0
    assert kappa(ConfusionMatrix(10, 0, 0, 0)) is None
    with pytest.raises(InvalidParams):
        kappa(ConfusionMatrix(0, 0, 0, 0))


@settings(max_examples=200)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_kappa_one_iff_no_errors(tp, fn, fp, tn):
    if tp + fn == 0 or fp + tn == 0:
        return
    k = kappa(ConfusionMatrix(tp, fn, fp, tn))
    assert (k == 1.0) == (fn == 0 and fp == 0)


def test_roc_examples():
    assert roc_auroc([1, 1, 0, 0], [0.9, 0.8, 0.3, 0.1])[1] == 1.0
    assert roc_auroc([1, 1, 0, 0], [0.9, 0.4, 0.6, 0.1])[1] == 0.75
    pts, area = roc_auroc([1, 0, 1, 0], [0.5] * 4)
    assert area == 0.5
    assert pts == [(np.inf, 0.0, 0.0), (0.5, 1.0, 1.0)]
    with pytest.raises(SingleClass):
        roc_auroc([1, 1], [0.1, 0.2])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 6)), min_size=2, max_size=60))
def test_auroc_equals_mann_whitney_and_label_swap(pairs):
    y = np.array([p[0] for p in pairs], dtype=int)
    s = np.array([p[1] for p in pairs], dtype=float) / 6
    if y.min() == y.max():
        return
    area = roc_auroc(y, s)[1]
    assert area == pytest.approx(mann_whitney(y, s), abs=1e-12)
    assert roc_auroc(1 - y, s)[1] == pytest.approx(1 - area, abs=1e-12)


def test_label_swap():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 100)
    s = rng.uniform(size=100)
    assert not np.any(s == 0.5)
    a = metric_block(y, s)
    # relabeling alone reverses the ranking quality
    assert metric_block(1 - y, s).auroc == pytest.approx(1 - a.auroc, abs=1e-12)
    # relabeling with scores re-expressed for the new positive class swaps the rates
    b = metric_block(1 - y, 1 - s)
    assert b.sensitivity == pytest.approx(a.specificity)
    assert b.specificity == pytest.approx(a.sensitivity)
    assert b.accuracy == pytest.approx(a.accuracy)


def test_monotone_transform_keeps_auroc():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 200)
    s = np.round(rng.uniform(size=200), 2)
    area = roc_auroc(y, s)[1]
    assert roc_auroc(y, np.exp(3 * s) - 7)[1] == area
    pts = roc_auroc(y, s)[0]
    pts_t = roc_auroc(y, s**3)[0]
    assert [p[1:] for p in pts] == [p[1:] for p in pts_t]


def test_roc_points_monotone_and_complete():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 50)
    y[:2] = [0, 1]
    pts, _ = roc_auroc(y, rng.uniform(size=50))
    fpr = [p[1] for p in pts]
    tpr = [p[2] for p in pts]
    assert fpr[0] == tpr[0] == 0 and fpr[-1] == tpr[-1] == 1
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)


# -- splits and folds ----------------------------------------------------------


def cohort_matrix(n_h=128, n_mi=90, p=2, seed=0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.zeros(n_h, int), np.ones(n_mi, int)]
    return matrix(rng.standard_normal((len(y), p)), y)


def test_split_sizes():
    data = cohort_matrix()
    train, test = split_holdout(data, EvalProtocol())
    assert len(train) == 174 and len(test) == 44
    assert np.bincount(train.labels).tolist() == [102, 72]
    assert set(train.row_ids).isdisjoint(test.row_ids)
    assert set(train.row_ids) | set(test.row_ids) == set(data.row_ids)


def test_split_is_seeded():
    data = cohort_matrix()
    a, _ = split_holdout(data, EvalProtocol(split_seed=5))
    b, _ = split_holdout(data, EvalProtocol(split_seed=5))
    c, _ = split_holdout(data, EvalProtocol(split_seed=6))
    assert a.row_ids == b.row_ids
    assert a.row_ids != c.row_ids


def test_split_too_small():
    with pytest.raises(TooSmall):
        split_holdout(matrix(np.zeros((10, 1)), np.zeros(10, int)), EvalProtocol())
    with pytest.raises(TooSmall):
        split_holdout(cohort_matrix(), EvalProtocol(holdout_fraction=0.99))


def test_protocol_validation():
    with pytest.raises(InvalidParams):
        EvalProtocol(holdout_fraction=1.0)
    with pytest.raises(InvalidParams):
        EvalProtocol(cv_folds=1)


def test_fold_partition_and_balance():
    y = np.r_[np.zeros(102, int), np.ones(72, int)]
    folds = stratified_folds(y, 10, 42)
    assert sorted(set(folds.tolist())) == list(range(10))
    sizes = np.bincount(folds)
    assert sizes.max() - sizes.min() <= 1
    mi = np.bincount(folds[y == 1], minlength=10)
    assert mi.max() - mi.min() <= 1


# -- cross-validation and benchmark --------------------------------------------


def test_separable_cv_is_perfect():
    rng = np.random.default_rng(3)
    y = np.r_[np.zeros(60, int), np.ones(60, int)]
    X = rng.standard_normal((120, 2))
    X[:, 0] += 20 * y
    cv = cross_validate(ModelSpec("lda"), matrix(X, y), EvalProtocol())
    assert cv.pooled.accuracy == 1.0 and cv.pooled.kappa == 1.0 and cv.pooled.auroc == 1.0
    assert len(cv.folds) == 10


def test_permuted_labels_have_null_kappa():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((80, 3))
    y0 = np.r_[np.zeros(40, int), np.ones(40, int)]
    kappas = []
    for t in range(100):
        y = np.random.default_rng(1000 + t).permutation(y0)
        cv = cross_validate(ModelSpec("lr"), matrix(X, y), EvalProtocol(cv_folds=5, split_seed=t))
        kappas.append(cv.pooled.kappa)
    assert abs(np.mean(kappas)) <= 0.1


def test_noise_features_heldout_auroc():
    # a 200-row held-out portion keeps the null AUROC spread near 0.04
    data = cohort_matrix(n_h=500, n_mi=500, p=3, seed=11)
    fs = FeatureSetDef("Noise", "noise", "Noise", ("f0", "f1", "f2"))
    specs = [ModelSpec(f) for f in FAMILIES]
    cells = benchmark_feature_sets(data, [fs], specs, EvalProtocol(cv_folds=2))
    for c in cells:
        assert 0.35 <= c.test.auroc <= 0.65, (c.family, c.test.auroc)


def tiny_feature_matrix(seed=0):
    rng = np.random.default_rng(seed)
    names = sorted({n for s in FEATURE_SETS.values() for n in s.feature_names})
    y = np.r_[np.zeros(30, int), np.ones(30, int)]
    X = rng.standard_normal((60, len(names))) + 0.8 * y[:, None]
    return FeatureMatrix([f"r{i}" for i in range(60)], names, X, y)


def test_bench_shape_and_jobs_invariance():
    data = tiny_feature_matrix()
    sets = list(FEATURE_SETS.values())[:2]
    specs = [ModelSpec("lr"), ModelSpec("knn"), ModelSpec("sgb", {"n_rounds": 20})]
    proto = EvalProtocol(cv_folds=3)
    a = benchmark_feature_sets(data, sets, specs, proto, jobs=1)
    b = benchmark_feature_sets(data, sets, specs, proto, jobs=2)
    assert len(a) == 6
    assert [(c.set_name, c.family) for c in a] == [(s.name, sp.family) for s in sets for sp in specs]
    for x, z in zip(a, b):
        assert x.test.as_tuple() == z.test.as_tuple()
        assert x.cv.pooled.as_tuple() == z.cv.pooled.as_tuple()
        np.testing.assert_array_equal(x.cv.oof_scores, z.cv.oof_scores)


def test_bench_rejects_missing_columns():
    fs = FeatureSetDef("Bad", "bad", "Bad", ("nope",))
    with pytest.raises(InvalidParams):
        benchmark_feature_sets(tiny_feature_matrix(), [fs], [ModelSpec("lr")], EvalProtocol(cv_folds=3))
