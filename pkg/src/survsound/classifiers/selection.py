"""Audio-level voting, bootstrap splits and exhaustive grid search."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..audio_io import ClassLabel
from ..augmentation import make_rng
from .base import N_CLASSES, LabeledDataset, fit

log = logging.getLogger(__name__)

_TAG_BOOTSTRAP = 4

DEFAULT_GRIDS = {
    "knn": {"k": [1, 3, 5, 7, 11]},
    "lda": {"reg": [1e-6, 1e-4, 1e-2]},
    "qda": {"reg": [1e-6, 1e-4, 1e-2]},
    "perceptron": {"lr": [0.1, 1.0], "epochs": [10, 50]},
    "sgd": {"alpha": [1e-5, 1e-4, 1e-3], "epochs": [20, 50]},
    "svm": {"C": [0.1, 1.0, 10.0], "kernel": ["linear", "rbf"], "gamma": [1 / 126, 0.01, 0.1]},
    "tree": {"max_depth": [5, 10, 20, None], "min_samples_leaf": [1, 5, 20]},
}


class SplitError(ValueError):
    pass


def majority_vote(window_labels: Sequence) -> ClassLabel:
    """Most frequent label; a tie goes to the lowest class code."""
    codes = np.asarray([int(v) for v in window_labels], dtype=int)
    if codes.size == 0:
        raise ValueError("majority_vote of an empty sequence")
    return ClassLabel(int(np.argmax(np.bincount(codes, minlength=N_CLASSES))))


@dataclass(frozen=True)
class BootstrapConfig:
    repetitions: int = 10
    train_fraction: float = 0.8
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


class Fold(NamedTuple):
    train: np.ndarray
    test: np.ndarray


def parent_id(source_id: str) -> str:
    """Original audio behind an augmented copy (``<id>__snr+5`` -> ``<id>``)."""
    return str(source_id).split("__", 1)[0]


def bootstrap_audio_splits(audio_ids: Sequence[str], audio_labels: Sequence[int],
                           cfg: BootstrapConfig) -> list[tuple[list[str], list[str]]]:
    """Train/out-of-bag audio id lists for every repetition.

    Audios are drawn with replacement until ``train_fraction * N`` distinct
    ones are in; the rest are out-of-bag. A draw missing any class is redone.
    """
    ids = list(audio_ids)
    labels = np.asarray(audio_labels, dtype=int)
    n = len(ids)
    classes = np.unique(labels)
    per_class = np.bincount(labels, minlength=N_CLASSES)[classes]
    if n < 3 or per_class.min() < 2:
        raise SplitError("bootstrap needs at least two audios per class")
    target = min(n - 1, max(1, int(round(cfg.train_fraction * n))))
    out = []
    for rep in range(cfg.repetitions):
        for attempt in range(cfg.max_attempts):
            rng = make_rng(cfg.seed, _TAG_BOOTSTRAP, rep, attempt)
            chosen = np.zeros(n, dtype=bool)
            count = 0
            while count < target:
                k = int(rng.integers(n))
                if not chosen[k]:
                    chosen[k] = True
                    count += 1
            if np.array_equal(np.unique(labels[chosen]), classes):
                break
        else:
            raise SplitError(f"could not draw a fold covering every class in {cfg.max_attempts} tries")
        out.append(([ids[i] for i in np.flatnonzero(chosen)],
                     [ids[i] for i in np.flatnonzero(~chosen)]))
    return out


def bootstrap_splits(dataset: LabeledDataset, cfg: BootstrapConfig,
                     by_parent: bool = False) -> list[Fold]:
    """Window-index folds whose train/test membership is decided per audio.

    With ``by_parent`` augmented copies follow their original audio.
    """
    groups = dataset.groups
    units = np.array([parent_id(g) for g in groups]) if by_parent else groups
    _, first = np.unique(units, return_index=True)
    order = np.sort(first)
    ids = units[order]
    labels = dataset.y[order]
    folds = []
    for train_ids, test_ids in bootstrap_audio_splits(ids, labels, cfg):
        train_mask = np.isin(units, train_ids)
        folds.append(Fold(np.flatnonzero(train_mask), np.flatnonzero(~train_mask)))
    return folds


def audio_accuracy(pred_codes: np.ndarray, y: np.ndarray, groups: np.ndarray) -> float:
    """Accuracy of the per-audio majority vote over window predictions."""
    groups = np.asarray(groups)
    uniq, inv = np.unique(groups, return_inverse=True)
    counts = np.zeros((uniq.size, N_CLASSES), dtype=int)
    np.add.at(counts, (inv, pred_codes), 1)
    voted = np.argmax(counts, axis=1)
    truth = np.zeros(uniq.size, dtype=int)
    truth[inv] = y
    return float(np.mean(voted == truth))


@dataclass
class CandidateScore:
    params: dict
    mean: float = float("nan")
    std: float = float("nan")
    scores: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class GridResult:
    kind: str
    best_params: Optional[dict]
    best_score: float
    table: list


def expand_grid(grid: dict) -> list[dict]:
    keys = list(grid)
    for k in keys:
        if not grid[k]:
            raise ValueError(f"empty candidate list for {k!r}")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def gridsearch(kind: str, grid: Optional[dict], dataset: LabeledDataset,
               cfg: BootstrapConfig = BootstrapConfig(), by_parent: bool = False,
               seed: int = 0) -> GridResult:
    """Score every candidate by mean audio-level bootstrap accuracy.

    A candidate whose fit raises is recorded as failed and skipped. Ties keep
    the earlier candidate.
    """
    grid = DEFAULT_GRIDS[kind] if grid is None else grid
    if isinstance(grid, dict) and kind in grid and isinstance(grid[kind], dict):
        grid = grid[kind]
    candidates = expand_grid(grid)
    if not candidates:
        raise ValueError("empty grid")
    folds = bootstrap_splits(dataset, cfg, by_parent)
    table = []
    best, best_score = None, -math.inf
    for params in candidates:
        cand = CandidateScore(dict(params))
        try:
            for fold in folds:
                model = fit(kind, params, dataset.subset(fold.train), seed)
                test = dataset.subset(fold.test)
                cand.scores.append(audio_accuracy(model.predict_codes(test.X), test.y, test.groups))
            cand.mean = float(np.mean(cand.scores))
            cand.std = float(np.std(cand.scores))
        except Exception as exc:  # noqa: BLE001 - a failed candidate must not stop the search
            cand.error = f"{type(exc).__name__}: {exc}"
            log.warning("%s %s failed: %s", kind, params, cand.error)
        table.append(cand)
        if not cand.failed and cand.mean > best_score:
            best, best_score = dict(params), cand.mean
    return GridResult(kind, best, best_score, table)
