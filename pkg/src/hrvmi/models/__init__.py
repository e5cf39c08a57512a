"""Eight binary classifier families behind one train / score interface.

Every family standardizes features with the training mean and SD, fits on
the standardized matrix and returns an MI score in [0, 1]; a score of at
least 0.5 predicts MI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from ..errors import ArityMismatch, DegenerateClass, InvalidParams
from . import linear, local, trees

FORMAT_TAG = "hrvmi-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Family:
    name: str
    short: str
    label: str
    defaults: dict
    fit: Callable
    score: Callable


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family("LogisticRegression", "lr", "Linear Regression", {"ridge": 1e-6, "max_iter": 100},
               linear.fit_logistic, linear.score_logistic),
        Family("LinearDiscriminantAnalysis", "lda", "Linear Discriminant Analysis", {"loading": 1e-6},
               linear.fit_lda, linear.score_lda),
        Family("KNearestNeighbor", "knn", "k-Nearest Neighbor", {"k": 5},
               local.fit_knn, local.score_knn),
        Family("RandomForest", "rf", "Random Forest",
               {"n_trees": 500, "min_samples_leaf": 1, "max_features": None},
               trees.fit_random_forest, trees.score_random_forest),
        Family("SupportVectorMachine", "svm", "Supporting Vector Machine", {"C": 1.0, "epochs": 100},
               linear.fit_svm, linear.score_svm),
        Family("NaiveBayes", "nb", "Naive Bayes", {"var_floor": 1e-9},
               local.fit_naive_bayes, local.score_naive_bayes),
        Family("C50Tree", "c50", "C 5.0", {"min_cases": 2, "confidence": 0.25},
               trees.fit_c50, trees.score_c50),
        Family("StochasticGradientBoosting", "sgb", "Stochastic Gradient Boosting",
               {"n_rounds": 200, "shrinkage": 0.1, "subsample": 0.5, "max_depth": 3, "min_samples_leaf": 10},
               trees.fit_boosting, trees.score_boosting),
    ]
}
SHORT_NAMES = {f.short: f.name for f in FAMILIES.values()}


def resolve_family(name: str) -> str:
    if name in FAMILIES:
        return name
    if name.lower() in SHORT_NAMES:
        return SHORT_NAMES[name.lower()]
    raise InvalidParams(f"unknown model family {name!r}")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: dict = field(default_factory=dict)
    train_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", resolve_family(self.family))
        unknown = set(self.hyperparameters) - set(FAMILIES[self.family].defaults)
        if unknown:
            raise InvalidParams(f"{self.family}: unknown hyperparameters {sorted(unknown)}")

    @property
    def resolved(self) -> dict:
        return {**FAMILIES[self.family].defaults, **self.hyperparameters}


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    feature_names: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    params: dict[str, Any]

    def standardize(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.mean):
            raise ArityMismatch(f"expected {len(self.mean)} features, got {X.shape[1]}")
        return (X - self.mean) / self.sd

    def predict_proba(self, X) -> np.ndarray:
        Z = self.standardize(X)
        s = FAMILIES[self.spec.family].score(self.params, Z)
        return np.clip(np.asarray(s, dtype=float), 0.0, 1.0)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)


def fit(spec: ModelSpec, X, y, feature_names=None) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    if X.ndim != 2 or X.shape[1] < 1 or len(X) != len(y):
        raise InvalidParams("need a 2-D feature matrix with one label per row")
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2 or len(counts) > 2:
        raise DegenerateClass(f"need >= 2 rows per class, got {counts.tolist()}")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (X - mean) / sd
    rng = np.random.default_rng(spec.train_seed)
    params = FAMILIES[spec.family].fit(Z, y, spec.resolved, rng)
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    return TrainedModel(spec, names, mean, sd, params)


def train(spec: ModelSpec, data) -> TrainedModel:
    """Fit ``spec`` on a :class:`~hrvmi.features.FeatureMatrix`."""
    return fit(spec, data.values, data.labels, data.feature_names)


def score(model: TrainedModel, row) -> float:
    row = np.asarray(row, dtype=float)
    if row.ndim != 1:
        raise ArityMismatch("score takes a single feature row")
    return float(model.predict_proba(row[None, :])[0])


# -- JSON round trip ---------------------------------------------------------


def _encode(v):
    if isinstance(v, np.ndarray):
        return {"__array__": v.tolist(), "dtype": str(v.dtype)}
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _decode(v):
    if isinstance(v, dict) and "__array__" in v:
        return np.asarray(v["__array__"], dtype=v["dtype"])
    return v


def to_json(model: TrainedModel) -> str:
    doc = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "family": model.spec.family,
        "hyperparameters": model.spec.hyperparameters,
        "train_seed": model.spec.train_seed,
        "feature_names": list(model.feature_names),
        "standardization": {"mean": model.mean.tolist(), "sd": model.sd.tolist()},
        "params": {k: _encode(v) for k, v in model.params.items()},
    }
    return json.dumps(doc, sort_keys=True)


def from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != FORMAT_TAG or doc.get("version") != FORMAT_VERSION:
        raise InvalidParams("not a supported model document")
    spec = ModelSpec(doc["family"], doc["hyperparameters"], doc["train_seed"])
    std = doc["standardization"]
    return TrainedModel(
        spec,
        tuple(doc["feature_names"]),
        np.asarray(std["mean"], dtype=float),
        np.asarray(std["sd"], dtype=float),
        {k: _decode(v) for k, v in doc["params"].items()},
    )
