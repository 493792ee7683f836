"""Soft-margin SVM trained by SMO on the dual.

Working-set selection is the maximal violating pair: the index with the
largest -y_i G_i among those that may move up and the smallest among those
that may move down, where G is the gradient of 1/2 a'Qa - e'a.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from scipy.spatial.distance import cdist

TAU = 1e-12


class SmoConvergenceError(RuntimeError):
    pass


def kernel_matrix(A, B, kernel: str, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        return np.exp(-gamma * cdist(A, B, "sqeuclidean"))
    raise ValueError(f"unknown kernel {kernel!r}")


class KernelRows:
    """Kernel rows of the training set: dense if small, else computed on demand."""

    def __init__(self, X, kernel: str, gamma: float, dense_limit: int = 6000,
                 cache_rows: int = 2048):
        self.X = X
        self.kernel, self.gamma = kernel, gamma
        n = X.shape[0]
        self.dense = kernel_matrix(X, X, kernel, gamma) if n <= dense_limit else None
        if self.dense is None:
            self.diag = np.ones(n) if kernel == "rbf" else np.einsum("ij,ij->i", X, X)
        else:
            self.diag = np.diag(self.dense).copy()
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._cap = cache_rows

    def row(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[i]
        r = self._cache.get(i)
        if r is None:
            r = kernel_matrix(self.X[i:i + 1], self.X, self.kernel, self.gamma)[0]
            self._cache[i] = r
            if len(self._cache) > self._cap:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(i)
        return r


def smo(rows: KernelRows, y: np.ndarray, C: float, tol: float = 1e-3,
        max_iter: int | None = None, track_objective: bool = False):
    """Solve the binary dual; returns (alpha, rho, info).

    Raises SmoConvergenceError if the violating-pair gap is still above
    ``tol`` after ``max_iter`` updates.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    history = [0.0] if track_objective else None
    it = 0
    while True:
        v = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        vu = np.where(up, v, -np.inf)
        vl = np.where(low, v, np.inf)
        i = int(np.argmax(vu))
        j = int(np.argmin(vl))
        gap = vu[i] - vl[j]
        if gap < tol:
            break
        if it >= max_iter:
            raise SmoConvergenceError(f"SMO stopped at {it} iterations with gap {gap:.3g} > {tol}")
        Ki, Kj = rows.row(i), rows.row(j)
        eta = max(Ki[i] + Kj[j] - 2.0 * Ki[j], TAU)
        step = gap / eta
        step = min(step, C - alpha[i] if y[i] > 0 else alpha[i])
        step = min(step, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        # snap to the box to keep the up/low sets exact
        for k in (i, j):
            if alpha[k] < 1e-12 * C:
                alpha[k] = 0.0
            elif alpha[k] > C * (1 - 1e-12):
                alpha[k] = C
        G += y * step * (Ki - Kj)
        it += 1
        if track_objective:
            history.append(float(-0.5 * alpha @ (G - 1.0)))
    rho = _rho(alpha, y, G, C)
    return alpha, rho, {"iterations": it, "gap": float(gap), "objective": history}


def _rho(alpha, y, G, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def kkt_violation(K: np.ndarray, y, alpha, rho: float, C: float) -> float:
    """Largest violation of the KKT conditions of the soft-margin dual."""
    y = np.asarray(y, dtype=np.float64)
    margin = y * (K @ (alpha * y) - rho)
    lower = alpha <= 0
    upper = alpha >= C
    free = ~lower & ~upper
    viol = np.zeros_like(margin)
    viol[lower] = np.maximum(0.0, 1.0 - margin[lower])
    viol[upper] = np.maximum(0.0, margin[upper] - 1.0)
    viol[free] = np.abs(margin[free] - 1.0)
    return float(viol.max()) if viol.size else 0.0


class SupportVectorMachine:
    """One-vs-rest soft-margin SVM, linear or RBF kernel."""

    kind = "svm"

    def __init__(self, C: float = 1.0, kernel: str = "rbf", gamma: float = 1.0 / 126,
                 tol: float = 1e-3, max_iter: int | None = None):
        self.C = float(C)
        self.kernel = kernel
        self.gamma = float(gamma)
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        rows = KernelRows(X, self.kernel, self.gamma)
        self.seen_ = np.bincount(y, minlength=n_classes) > 0
        coefs, rhos, keep = [], [], np.zeros(X.shape[0], dtype=bool)
        self.info_ = []
        for c in range(n_classes):
            if not self.seen_[c]:
                coefs.append(np.zeros(X.shape[0]))
                rhos.append(0.0)
                continue
            t = np.where(y == c, 1.0, -1.0)
            alpha, rho, info = smo(rows, t, self.C, self.tol, self.max_iter)
            coefs.append(alpha * t)
            rhos.append(rho)
            keep |= alpha > 0
            self.info_.append(info)
        self.support_vectors_ = X[keep]
        self.dual_coef_ = np.stack(coefs)[:, keep]
        self.rho_ = np.asarray(rhos)
        return self

    def decision_function(self, X) -> np.ndarray:
        K = kernel_matrix(X, self.support_vectors_, self.kernel, self.gamma)
        return K @ self.dual_coef_.T - self.rho_

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        scores[:, ~self.seen_] = -np.inf
        return np.argmax(scores, axis=1)

    def get_params(self) -> dict:
        return {"support_vectors": self.support_vectors_.tolist(),
                "dual_coef": self.dual_coef_.tolist(), "rho": self.rho_.tolist(),
                "seen": self.seen_.tolist()}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        m.support_vectors_ = np.asarray(p["support_vectors"], dtype=float)
        m.dual_coef_ = np.asarray(p["dual_coef"], dtype=float)
        m.rho_ = np.asarray(p["rho"], dtype=float)
        m.seen_ = np.asarray(p["seen"], dtype=bool)
        return m
