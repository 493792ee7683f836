"""Gaussian discriminant classifiers with ridge-regularised covariances."""

from __future__ import annotations

import numpy as np


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "covariance is singular; use a positive regularisation (reg > 0)") from exc


class LinearDiscriminant:
    """Shared-covariance Gaussian classifier (LDA)."""

    kind = "lda"

    def __init__(self, reg: float = 1e-4):
        self.reg = float(reg)

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        d = X.shape[1]
        present = np.unique(y)
        means = np.zeros((n_classes, d))
        scatter = np.zeros((d, d))
        for c in present:
            xc = X[y == c]
            means[c] = xc.mean(axis=0)
            r = xc - means[c]
            scatter += r.T @ r
        dof = max(X.shape[0] - present.size, 1)
        cov = scatter / dof + self.reg * np.eye(d)
        L = _chol(cov)
        # W[c] = cov^-1 mu_c
        W = np.linalg.solve(L.T, np.linalg.solve(L, means.T)).T
        prior = np.bincount(y, minlength=n_classes) / y.size
        with np.errstate(divide="ignore"):
            logp = np.log(prior)
        self.coef_ = W
        self.intercept_ = -0.5 * np.einsum("ij,ij->i", W, means) + logp
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef_.T + self.intercept_

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def get_params(self) -> dict:
        return {"coef": self.coef_.tolist(),
                "intercept": [float(v) if np.isfinite(v) else None for v in self.intercept_]}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        m.coef_ = np.asarray(p["coef"], dtype=float)
        m.intercept_ = np.array([-np.inf if v is None else v for v in p["intercept"]])
        return m


class QuadraticDiscriminant:
    """Per-class-covariance Gaussian classifier (QDA)."""

    kind = "qda"

    def __init__(self, reg: float = 1e-4):
        self.reg = float(reg)

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        d = X.shape[1]
        self.means_ = np.zeros((n_classes, d))
        self.whiten_ = np.zeros((n_classes, d, d))
        self.offset_ = np.full(n_classes, -np.inf)
        counts = np.bincount(y, minlength=n_classes)
        for c in np.unique(y):
            xc = X[y == c]
            mu = xc.mean(axis=0)
            r = xc - mu
            cov = r.T @ r / max(xc.shape[0] - 1, 1) + self.reg * np.eye(d)
            L = _chol(cov)
            self.means_[c] = mu
            # ||L^-1 (x - mu)||^2 is the Mahalanobis distance
            self.whiten_[c] = np.linalg.inv(L)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            self.offset_[c] = -0.5 * logdet + np.log(counts[c] / y.size)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.means_.shape[0]))
        for c in range(self.means_.shape[0]):
            if not np.isfinite(self.offset_[c]):
                out[:, c] = -np.inf
                continue
            z = (X - self.means_[c]) @ self.whiten_[c].T
            out[:, c] = self.offset_[c] - 0.5 * np.einsum("ij,ij->i", z, z)
        return out

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def get_params(self) -> dict:
        return {"means": self.means_.tolist(), "whiten": self.whiten_.tolist(),
                "offset": [float(v) if np.isfinite(v) else None for v in self.offset_]}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        m.means_ = np.asarray(p["means"], dtype=float)
        m.whiten_ = np.asarray(p["whiten"], dtype=float)
        m.offset_ = np.array([-np.inf if v is None else v for v in p["offset"]])
        return m
