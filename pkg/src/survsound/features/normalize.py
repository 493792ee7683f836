"""Train-fold z-score normalisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


def fit_normalizer(train_vectors) -> Normalizer:
    """Per-dimension mean and population std; zero std is replaced by 1."""
    x = np.atleast_2d(np.asarray(train_vectors, dtype=np.float64))
    if x.shape[0] < 1 or x.size == 0:
        raise ValueError("cannot fit a normalizer on an empty training set")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return Normalizer(mu, sd)


def apply_normalizer(norm: Normalizer, vector) -> np.ndarray:
    return norm.apply(vector)
