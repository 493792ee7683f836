"""Wall-clock timing of beamforming, feature extraction and classification.

Every stage is timed with ``time.perf_counter`` over ``runs`` calls after
``warmup`` discarded calls. Garbage collection is paused while a stage runs.
Before/after-augmentation classifier timings are interleaved call by call so
slow drifts of the machine affect both variants alike.
"""

from __future__ import annotations

import gc
import time
from contextlib import contextmanager
from typing import Callable, Optional, Sequence

import numpy as np

from ..array_sim import capture_seed, clip_doa, simulate_capture
from ..beamforming import beamform
from ..classifiers import fit, parent_id
from .experiment import (ArtifactCache, ExperimentPlan, TimingRow, _features_or_empty,
                         _hyperparams, clip_key, content_key, load_clips, train_features,
                         training_dataset)

DEFAULT_RUNS = 30
DEFAULT_WARMUP = 3


@contextmanager
def _gc_paused():
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def time_calls(calls: Sequence[Callable[[], object]], runs: int = DEFAULT_RUNS,
               warmup: int = DEFAULT_WARMUP) -> list[np.ndarray]:
    """Per-call seconds for each callable, cycling through them in turn.

    Call ``r`` of every callable happens before call ``r + 1`` of any, so
    the returned samples are paired in time.
    """
    if runs < 1:
        raise ValueError("runs must be positive")
    out = [np.empty(runs) for _ in calls]
    with _gc_paused():
        for r in range(warmup + runs):
            for k, fn in enumerate(calls):
                t0 = time.perf_counter()
                fn()
                dt = time.perf_counter() - t0
                if r >= warmup:
                    out[k][r - warmup] = dt
    return out


def timing_row(stage: str, seconds: np.ndarray) -> TimingRow:
    ms = np.asarray(seconds) * 1e3
    return TimingRow(stage, float(ms.mean()), float(ms.std()), int(ms.size))


def _cycle(items, fn):
    state = {"i": 0}

    def call():
        item = items[state["i"] % len(items)]
        state["i"] += 1
        return fn(item)
    return call


def measure_timing(plan: ExperimentPlan, cache: Optional[ArtifactCache] = None,
                   runs: int = DEFAULT_RUNS, warmup: int = DEFAULT_WARMUP,
                   snr_db: float = 10.0, max_clips: Optional[int] = None):
    """Timing rows and ratios for the plan's beamformers and classifiers.

    Each run processes one clip (cycled through the dataset), so means are
    averages over clips. Models are fitted once on the whole original or
    augmented training set with that variant's hyperparameters (tuned by
    gridsearch when the plan asks for it).

    Returns ``(rows, ratios)``; ``ratios`` holds ``gsc/das`` when both
    beamformers are planned and ``<kind> augmented/original`` per classifier.
    """
    plan.validate()
    cache = cache or ArtifactCache(plan.cache_dir)
    clips, copies = load_clips(plan)
    if max_clips is not None:
        clips = clips[:max_clips]
        keep = {c.source_id for c in clips}
        copies = [c for c in copies if parent_id(c.source_id) in keep]
    rows: list[TimingRow] = []
    ratios: dict = {}

    captures = [simulate_capture(c, plan.geometry, clip_doa(plan.seed, i), snr_db,
                                 capture_seed(plan.seed, i, 0), plan.delay_mode)
                for i, c in enumerate(clips)]
    max_lag = plan.geometry.max_delay_samples(clips[0].sample_rate) + 1.0
    beams = [bf for bf in plan.beamformers if bf != "none"]
    calls = [_cycle(captures, lambda rec, bf=bf: beamform(rec, bf, plan.tdoa[0], max_lag,
                                                          plan.lms, plan.delay_mode))
             for bf in beams]
    means = {}
    for bf, secs in zip(beams, time_calls(calls, runs, warmup)):
        rows.append(timing_row(f"beamform/{bf}", secs))
        means[bf] = rows[-1].mean_ms
    if "das" in means and "gsc" in means:
        ratios["gsc/das"] = means["gsc"] / means["das"]

    (secs,) = time_calls([_cycle(clips, _features_or_empty)], runs, warmup)
    rows.append(timing_row("features", secs))

    sets = {"original": training_dataset(clips, cache)}
    if copies and "augmented" in plan.variants:
        sets["augmented"] = training_dataset((clips if plan.include_originals else []) + copies,
                                             cache)
    # same key as run_experiment, so tuned hyperparameters are shared
    data_key = content_key([clip_key(c) for c in clips], [clip_key(c) for c in copies],
                           plan.include_originals)
    test = [train_features(c, cache) for c in clips]
    test = [X for X in test if X.shape[0] > 0]
    for kind in plan.classifiers:
        models = {}
        for v, d in sets.items():
            hyper = _hyperparams(plan, kind, v, d, cache, data_key)
            models[v] = fit(kind, hyper, d, plan.seed)
        calls = [_cycle(test, m.predict_codes) for m in models.values()]
        kmeans = {}
        for variant, secs in zip(models, time_calls(calls, runs, warmup)):
            rows.append(timing_row(f"classify/{kind}/{variant}", secs))
            kmeans[variant] = rows[-1].mean_ms
        if len(kmeans) == 2:
            ratios[f"{kind} augmented/original"] = kmeans["augmented"] / kmeans["original"]
    return rows, ratios
