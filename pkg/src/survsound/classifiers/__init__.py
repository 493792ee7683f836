"""The seven window classifiers and audio-level model selection."""

from .base import (KINDS, LabeledDataset, TrainedModel, fit, make_estimator, predict,
                   predict_window_batch)
from .discriminant import LinearDiscriminant, QuadraticDiscriminant, SingularCovarianceError
from .knn import KNearestNeighbors
from .linear import HingeSGD, Perceptron
from .selection import (DEFAULT_GRIDS, BootstrapConfig, CandidateScore, Fold, GridResult,
                        SplitError, audio_accuracy, bootstrap_audio_splits, bootstrap_splits,
                        expand_grid, gridsearch, majority_vote, parent_id)
from .svm import SmoConvergenceError, SupportVectorMachine, kkt_violation, smo
from .tree import DecisionTree, best_split, gini

__all__ = [
    "BootstrapConfig", "CandidateScore", "DEFAULT_GRIDS", "DecisionTree", "Fold", "GridResult",
    "HingeSGD", "KINDS", "KNearestNeighbors", "LabeledDataset", "LinearDiscriminant",
    "Perceptron", "QuadraticDiscriminant", "SingularCovarianceError", "SmoConvergenceError",
    "SplitError", "SupportVectorMachine", "TrainedModel", "audio_accuracy",
    "bootstrap_audio_splits", "bootstrap_splits", "best_split", "expand_grid", "fit", "gini",
    "gridsearch", "kkt_violation", "majority_vote", "make_estimator", "parent_id", "predict",
    "predict_window_batch", "smo",
]
