from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


class KNearestNeighbors:
    """Euclidean k-NN with deterministic tie handling.

    Equidistant neighbours are taken in training order; a tied vote goes to
    the lowest class index.
    """

    kind = "knn"

    def __init__(self, k: int = 5, chunk: int = 512):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self.chunk = chunk

    def fit(self, X, y, n_classes: int):
        self.X_ = np.asarray(X, dtype=np.float64)
        self.y_ = np.asarray(y, dtype=int)
        self.n_classes_ = n_classes
        return self

    def neighbors(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        k = min(self.k, self.X_.shape[0])
        out = np.empty((X.shape[0], k), dtype=int)
        for s in range(0, X.shape[0], self.chunk):
            d = cdist(X[s:s + self.chunk], self.X_, "sqeuclidean")
            out[s:s + self.chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
        return out

    def predict(self, X) -> np.ndarray:
        nb = self.y_[self.neighbors(X)]
        counts = np.zeros((nb.shape[0], self.n_classes_), dtype=int)
        np.add.at(counts, (np.arange(nb.shape[0])[:, None], nb), 1)
        return np.argmax(counts, axis=1)

    def get_params(self) -> dict:
        return {"X": self.X_.tolist(), "y": self.y_.tolist(), "n_classes": self.n_classes_}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        return m.fit(np.asarray(p["X"]), np.asarray(p["y"]), p["n_classes"])
