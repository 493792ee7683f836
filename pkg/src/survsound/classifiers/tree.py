"""CART classification tree with Gini impurity."""

from __future__ import annotations

import numpy as np


def gini(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1)
    p = counts / np.where(n > 0, n, 1.0)[..., None]
    return 1.0 - np.sum(p * p, axis=-1)


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int = 1):
    """(gain, feature, threshold) of the best axis-aligned split, or None.

    Thresholds are midpoints between consecutive distinct values; x <= t goes
    left. Equal gains resolve to the lowest feature, then the lowest threshold.
    """
    n, d = X.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    total = onehot.sum(axis=0)
    parent = gini(total)
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        nl = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        right = total - left
        gain = parent - (nl / n) * gini(left) - ((n - nl) / n) * gini(right)
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if best is None or gain[k] > best[0]:
            best = (float(gain[k]), f, float((xs[k] + xs[k + 1]) / 2.0))
    return best


class DecisionTree:
    kind = "tree"

    def __init__(self, max_depth: int | None = None, min_samples_leaf: int = 1):
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=int)
        self.n_classes_ = n_classes
        feat, thr, left, right, value = [], [], [], [], []

        def node(idx, depth):
            nid = len(feat)
            counts = np.bincount(y[idx], minlength=n_classes)
            feat.append(-1)
            thr.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(counts)
            if np.count_nonzero(counts) <= 1:
                return nid
            if self.max_depth is not None and depth >= self.max_depth:
                return nid
            split = best_split(X[idx], y[idx], n_classes, self.min_samples_leaf)
            if split is None:
                return nid
            _, f, t = split
            go_left = X[idx, f] <= t
            feat[nid], thr[nid] = f, t
            left[nid] = node(idx[go_left], depth + 1)
            right[nid] = node(idx[~go_left], depth + 1)
            return nid

        node(np.arange(X.shape[0]), 0)
        self.feature_ = np.asarray(feat)
        self.threshold_ = np.asarray(thr)
        self.left_ = np.asarray(left)
        self.right_ = np.asarray(right)
        self.value_ = np.asarray(value)
        self._compile()
        return self

    @property
    def depth(self) -> int:
        def d(i):
            return 0 if self.left_[i] < 0 else 1 + max(d(self.left_[i]), d(self.right_[i]))
        return d(0)

    # above this many internal nodes the path matrix costs more than descent
    PATH_MATRIX_LIMIT = 256

    def _compile(self):
        """Precompute a branch-free predictor.

        Small trees use a path matrix: paths[m, l] is +1 if leaf l lies right
        of internal node m, -1 if left, 0 if off-path. With 0/1 go-right
        decisions d, (d @ paths)[l] equals the number of right turns on the
        path to l exactly when the sample reaches l. Large trees descend
        level by level instead, with every leaf pointing at itself.
        """
        internal = np.flatnonzero(self.left_ >= 0)
        leaves = np.flatnonzero(self.left_ < 0)
        self._leaf_of_node = np.full(self.left_.size, -1)
        self._leaf_of_node[leaves] = np.arange(leaves.size)
        self._leaf_label = np.argmax(self.value_[leaves], axis=1)
        self._paths = None
        if internal.size <= self.PATH_MATRIX_LIMIT:
            pos_i = {n: k for k, n in enumerate(internal)}
            paths = np.zeros((internal.size, leaves.size), dtype=np.float32)
            stack = [(0, [])]
            while stack:
                nid, trail = stack.pop()
                if self.left_[nid] < 0:
                    for m, s in trail:
                        paths[pos_i[m], self._leaf_of_node[nid]] = s
                    continue
                stack.append((self.left_[nid], trail + [(nid, -1.0)]))
                stack.append((self.right_[nid], trail + [(nid, 1.0)]))
            self._internal_feat = self.feature_[internal]
            self._internal_thr = self.threshold_[internal]
            self._paths = paths
            self._n_right = (paths > 0).sum(axis=0).astype(np.float32)
            return
        is_leaf = self.left_ < 0
        ids = np.arange(self.left_.size)
        self._next_left = np.where(is_leaf, ids, self.left_)
        self._next_right = np.where(is_leaf, ids, self.right_)
        self._walk_feat = np.where(is_leaf, 0, self.feature_)
        self._walk_thr = np.where(is_leaf, 0.0, self.threshold_)
        self._depth = self.depth

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self._paths is not None:
            if self._paths.shape[0] == 0:
                return np.full(X.shape[0], self._leaf_label[0])
            right = (X[:, self._internal_feat] > self._internal_thr).astype(np.float32)
            hit = (right @ self._paths) == self._n_right
            return self._leaf_label[np.argmax(hit, axis=1)]
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=int)
        for _ in range(self._depth):
            go = X[rows, self._walk_feat[node]] > self._walk_thr[node]
            node = np.where(go, self._next_right[node], self._next_left[node])
        return self._leaf_label[self._leaf_of_node[node]]

    def predict_traverse(self, X) -> np.ndarray:
        """Node-by-node reference traversal."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(X.shape[0], dtype=int)
        for r, x in enumerate(X):
            i = 0
            while self.left_[i] >= 0:
                i = self.left_[i] if x[self.feature_[i]] <= self.threshold_[i] else self.right_[i]
            out[r] = int(np.argmax(self.value_[i]))
        return out

    def get_params(self) -> dict:
        return {"feature": self.feature_.tolist(), "threshold": self.threshold_.tolist(),
                "left": self.left_.tolist(), "right": self.right_.tolist(),
                "value": self.value_.tolist(), "n_classes": self.n_classes_}

    @classmethod
    def from_params(cls, hyper: dict, p: dict):
        m = cls(**hyper)
        m.feature_ = np.asarray(p["feature"], dtype=int)
        m.threshold_ = np.asarray(p["threshold"], dtype=float)
        m.left_ = np.asarray(p["left"], dtype=int)
        m.right_ = np.asarray(p["right"], dtype=int)
        m.value_ = np.asarray(p["value"], dtype=int)
        m.n_classes_ = p["n_classes"]
        m._compile()
        return m
