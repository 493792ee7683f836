"""Fitting, prediction and persistence shared by the seven classifier kinds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..audio_io import ClassLabel
from ..features.normalize import Normalizer, fit_normalizer
from .discriminant import LinearDiscriminant, QuadraticDiscriminant
from .knn import KNearestNeighbors
from .linear import HingeSGD, Perceptron
from .svm import SupportVectorMachine
from .tree import DecisionTree

ESTIMATORS = {
    "knn": KNearestNeighbors,
    "lda": LinearDiscriminant,
    "qda": QuadraticDiscriminant,
    "perceptron": Perceptron,
    "sgd": HingeSGD,
    "svm": SupportVectorMachine,
    "tree": DecisionTree,
}
KINDS = tuple(ESTIMATORS)
N_CLASSES = len(ClassLabel)
MODEL_FORMAT_VERSION = 1


@dataclass
class LabeledDataset:
    """Window-level feature matrix with labels and the parent audio of each row."""

    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=int)
        self.groups = np.asarray(self.groups).astype(str)
        if not (self.X.shape[0] == self.y.shape[0] == self.groups.shape[0]):
            raise ValueError("X, y and groups must have the same number of rows")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("feature matrix contains non-finite values")

    def __len__(self) -> int:
        return self.y.shape[0]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx], self.groups[idx])

    def audio_ids(self) -> np.ndarray:
        """Distinct parent audios in first-appearance order."""
        _, first = np.unique(self.groups, return_index=True)
        return self.groups[np.sort(first)]

    def audio_labels(self) -> dict:
        return {g: int(self.y[np.flatnonzero(self.groups == g)[0]]) for g in self.audio_ids()}

    @classmethod
    def concat(cls, parts) -> "LabeledDataset":
        parts = list(parts)
        return cls(np.concatenate([p.X for p in parts]), np.concatenate([p.y for p in parts]),
                   np.concatenate([p.groups for p in parts]))


@dataclass
class TrainedModel:
    kind: str
    hyperparams: dict
    estimator: object
    normalizer: Normalizer
    classes: np.ndarray = field(default_factory=lambda: np.arange(N_CLASSES))

    @property
    def n_features(self) -> int:
        return self.normalizer.mean.shape[0]

    def predict_codes(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return self.estimator.predict(self.normalizer.apply(X))

    def to_dict(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "kind": self.kind,
                "hyperparams": _jsonable(self.hyperparams),
                "params": self.estimator.get_params(),
                "normalizer": self.normalizer.to_dict(),
                "classes": self.classes.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        est_cls = ESTIMATORS[d["kind"]]
        hyper = dict(d["hyperparams"])
        est = est_cls.from_params(hyper, d["params"])
        return cls(d["kind"], hyper, est, Normalizer.from_dict(d["normalizer"]),
                   np.asarray(d["classes"], dtype=int))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


def make_estimator(kind: str, hyperparams: Optional[dict] = None, seed: int = 0):
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {', '.join(KINDS)}")
    hyper = dict(hyperparams or {})
    if kind in ("perceptron", "sgd"):
        hyper.setdefault("seed", seed)
    return ESTIMATORS[kind](**hyper), hyper


def fit(kind: str, hyperparams: Optional[dict], train: LabeledDataset, seed: int = 0) -> TrainedModel:
    """Fit the train-set normaliser, then the estimator on normalised windows."""
    if np.unique(train.y).size < 2:
        raise ValueError("training data needs at least two classes")
    est, hyper = make_estimator(kind, hyperparams, seed)
    norm = fit_normalizer(train.X)
    est.fit(norm.apply(train.X), train.y, N_CLASSES)
    return TrainedModel(kind, hyper, est, norm, np.unique(train.y))


def predict_window_batch(model: TrainedModel, vectors) -> np.ndarray:
    return model.predict_codes(vectors)


def predict(model: TrainedModel, vector) -> ClassLabel:
    v = np.asarray(getattr(vector, "values", vector), dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("predict expects a single feature vector")
    return ClassLabel(int(model.predict_codes(v[None, :])[0]))
