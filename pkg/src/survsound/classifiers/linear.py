"""One-vs-rest linear models trained sample by sample."""

from __future__ import annotations

import numpy as np


def _ovr_targets(y: np.ndarray, n_classes: int) -> np.ndarray:
    return np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)


class _LinearOvR:
    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_.T + self.intercept_

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        scores[:, ~self.seen_] = -np.inf
        return np.argmax(scores, axis=1)

    def get_params(self) -> dict:
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_.tolist(),
                "seen": self.seen_.tolist()}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        m.coef_ = np.asarray(p["coef"], dtype=float)
        m.intercept_ = np.asarray(p["intercept"], dtype=float)
        m.seen_ = np.asarray(p["seen"], dtype=bool)
        return m


class Perceptron(_LinearOvR):
    """Rosenblatt perceptron, one binary unit per class, shuffled every epoch."""

    kind = "perceptron"

    def __init__(self, lr: float = 1.0, epochs: int = 10, seed: int = 0):
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.seed = int(seed)

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        T = _ovr_targets(y, n_classes)
        W = np.zeros((n_classes, Xa.shape[1]))
        rng = np.random.default_rng(self.seed)
        self.epochs_run_ = 0
        for _ in range(self.epochs):
            self.epochs_run_ += 1
            mistakes = 0
            for i in rng.permutation(Xa.shape[0]):
                x, t = Xa[i], T[i]
                wrong = t * (W @ x) <= 0.0
                if wrong.any():
                    mistakes += 1
                    W[wrong] += (self.lr * t[wrong])[:, None] * x
            if mistakes == 0:
                break
        self.coef_, self.intercept_ = W[:, :-1], W[:, -1]
        self.seen_ = np.bincount(y, minlength=n_classes) > 0
        return self


class HingeSGD(_LinearOvR):
    """L2-regularised hinge loss minimised by SGD with step 1/(lambda t).

    The bias is an extra constant input and is regularised with the weights.
    """

    kind = "sgd"

    def __init__(self, alpha: float = 1e-4, epochs: int = 20, seed: int = 0,
                 project: bool = True):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.project = project

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        Xa = np.hstack([X, np.ones((X.shape[0], 1))])
        T = _ovr_targets(y, n_classes)
        W = np.zeros((n_classes, Xa.shape[1]))
        lam = self.alpha
        radius = 1.0 / np.sqrt(lam)
        rng = np.random.default_rng(self.seed)
        t = 0
        for _ in range(self.epochs):
            for i in rng.permutation(Xa.shape[0]):
                t += 1
                eta = 1.0 / (lam * t)
                x, tgt = Xa[i], T[i]
                active = tgt * (W @ x) < 1.0
                W *= 1.0 - eta * lam
                if active.any():
                    W[active] += (eta * tgt[active])[:, None] * x
                if self.project:
                    norms = np.linalg.norm(W, axis=1)
                    over = norms > radius
                    if over.any():
                        W[over] *= (radius / norms[over])[:, None]
        self.coef_, self.intercept_ = W[:, :-1], W[:, -1]
        self.seen_ = np.bincount(y, minlength=n_classes) > 0
        return self
