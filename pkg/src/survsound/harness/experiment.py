"""Bootstrap evaluation of classifiers on beamformed simulated captures.

Training features come from clean (or noise-augmented) mono clips; test
features come from simulated 4-channel captures of the out-of-bag audios after
each beamformer. Feature matrices and per-fold results are cached on disk
under a content hash so interrupted runs resume.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..array_sim import ArrayGeometry, DEFAULT_SIM_SNRS, capture_seed, clip_doa, simulate_capture
from ..audio_io import AudioClip, load_dataset
from ..augmentation import DEFAULT_AUGMENT_SNRS, augment_dataset
from ..beamforming import BEAMFORMER_MODES, LmsConfig, beamform
from ..classifiers import (DEFAULT_GRIDS, KINDS, BootstrapConfig, LabeledDataset,
                           bootstrap_audio_splits, fit, gridsearch, parent_id)
from ..classifiers.base import N_CLASSES
from ..features import clip_features
from .synthetic import SyntheticDatasetSpec, generate_synthetic_dataset

log = logging.getLogger(__name__)

CACHE_ENV = "SURVSOUND_CACHE_DIR"
TDOA_MODES = ("xcorr", "gcc-phat", "oracle")
VARIANTS = ("original", "augmented")
_CACHE_VERSION = 1


class PlanError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------- plan

@dataclass
class ExperimentPlan:
    dataset: Optional[str] = None
    augmented: Optional[str] = None
    synthetic: Optional[SyntheticDatasetSpec] = None
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    snrs: tuple = DEFAULT_SIM_SNRS
    beamformers: tuple = BEAMFORMER_MODES
    classifiers: tuple = KINDS
    variants: tuple = VARIANTS
    tdoa: tuple = ("xcorr",)
    delay_mode: str = "sinc"
    hyperparams: dict = field(default_factory=dict)
    tune: bool = False
    grids: Optional[dict] = None
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    augment_snrs: tuple = DEFAULT_AUGMENT_SNRS
    include_originals: bool = True
    redraw_doa: bool = False
    lms: LmsConfig = field(default_factory=LmsConfig)
    seed: int = 0
    output_dir: Optional[str] = None
    cache_dir: Optional[str] = None
    workers: int = 1

    def validate(self) -> "ExperimentPlan":
        if self.dataset is None and self.synthetic is None:
            raise PlanError("plan needs a dataset path or a synthetic spec")
        for p in (self.dataset, self.augmented):
            if p is not None and not Path(p).exists():
                raise PlanError(f"path does not exist: {p}")
        if self.augmented is not None and self.dataset is None:
            raise PlanError("an augmented dataset needs its original dataset")
        _check_subset("beamformer", self.beamformers, BEAMFORMER_MODES)
        _check_subset("classifier", self.classifiers, KINDS)
        _check_subset("variant", self.variants, VARIANTS)
        _check_subset("tdoa mode", self.tdoa, TDOA_MODES)
        if self.delay_mode not in ("sinc", "nearest"):
            raise PlanError(f"unknown delay mode {self.delay_mode!r}")
        if not self.snrs:
            raise PlanError("empty SNR list")
        if any(not np.isfinite(float(s)) for s in self.snrs):
            raise PlanError("SNRs must be finite")
        unknown = {k for k in self.hyperparams
                   if k.split("/", 1)[0] not in KINDS
                   or ("/" in k and k.split("/", 1)[1] not in VARIANTS)}
        if unknown:
            raise PlanError(f"hyperparams for unknown kinds: {sorted(unknown)}")
        if self.workers < 1:
            raise PlanError("workers must be >= 1")
        return self

    def hyperparams_for(self, kind: str, variant: str) -> dict:
        """Fixed hyperparameters; a ``kind/variant`` key overrides ``kind``."""
        hp = self.hyperparams.get(f"{kind}/{variant}", self.hyperparams.get(kind, {}))
        return dict(hp or {})

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ArrayGeometry):
                v = v.to_dict()
            elif dataclasses.is_dataclass(v):
                v = dataclasses.asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise PlanError(f"unknown plan keys: {sorted(extra)}")
        try:
            if d.get("geometry") is not None:
                g = d["geometry"]
                d["geometry"] = ArrayGeometry.from_file(g) if isinstance(g, str) else ArrayGeometry.from_dict(g)
            else:
                d.pop("geometry", None)
            if d.get("synthetic") is not None:
                s = dict(d["synthetic"])
                if "duration_range" in s:
                    s["duration_range"] = tuple(s["duration_range"])
                d["synthetic"] = SyntheticDatasetSpec(**s)
            if "bootstrap" in d:
                d["bootstrap"] = BootstrapConfig(**d["bootstrap"])
            if "lms" in d:
                d["lms"] = LmsConfig(**d["lms"])
            for k in ("snrs", "augment_snrs"):
                if k in d:
                    d[k] = tuple(_expand_snrs(d[k]))
            for k in ("beamformers", "classifiers", "variants", "tdoa"):
                if k in d:
                    d[k] = (d[k],) if isinstance(d[k], str) else tuple(d[k])
            return cls(**d).validate()
        except PlanError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise PlanError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentPlan":
        import yaml
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise PlanError(f"cannot read plan {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise PlanError("plan file must hold a mapping")
        return cls.from_dict(raw)


def _check_subset(what, chosen, allowed):
    if not chosen:
        raise PlanError(f"no {what} selected")
    bad = [c for c in chosen if c not in allowed]
    if bad:
        raise PlanError(f"unknown {what}(s) {bad}; choose from {', '.join(allowed)}")


def _expand_snrs(v):
    if isinstance(v, str):
        from ..augmentation import parse_range
        return parse_range(v)
    return [float(s) for s in v]


# ---------------------------------------------------------------- report

@dataclass
class AccuracyRow:
    classifier: str
    beamformer: str
    tdoa: str
    variant: str
    snr_db: float
    mean_accuracy: float
    std_accuracy: float
    n_folds: int
    status: str = "ok"

    def as_tuple(self):
        return dataclasses.astuple(self)


@dataclass
class TimingRow:
    stage: str
    mean_ms: float
    std_ms: float
    n_samples: int


@dataclass
class EvaluationReport:
    rows: list = field(default_factory=list)
    timing: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    ratios: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failures

    def cell(self, classifier, beamformer, variant, snr, tdoa=None) -> AccuracyRow:
        for r in self.rows:
            if (r.classifier, r.beamformer, r.variant) == (classifier, beamformer, variant) \
                    and r.snr_db == float(snr) and (tdoa is None or r.tdoa == tdoa):
                return r
        raise KeyError((classifier, beamformer, variant, snr, tdoa))

    def curve(self, classifier, beamformer, variant, tdoa=None):
        pts = sorted((r.snr_db, r.mean_accuracy) for r in self.rows
                     if (r.classifier, r.beamformer, r.variant) == (classifier, beamformer, variant)
                     and (tdoa is None or r.tdoa == tdoa))
        return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])

    def to_dict(self) -> dict:
        return {"rows": [dataclasses.asdict(r) for r in self.rows],
                "timing": [dataclasses.asdict(t) for t in self.timing],
                "failures": list(self.failures), "ratios": dict(self.ratios),
                "meta": dict(self.meta)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls([AccuracyRow(**r) for r in d.get("rows", [])],
                   [TimingRow(**t) for t in d.get("timing", [])],
                   list(d.get("failures", [])), dict(d.get("ratios", {})), dict(d.get("meta", {})))


# ---------------------------------------------------------------- caching

def content_key(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(str(p.dtype).encode() + str(p.shape).encode())
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b"\x00")
    return h.hexdigest()


def clip_key(clip: AudioClip) -> str:
    return content_key(clip.samples, clip.sample_rate, int(clip.label) if clip.label is not None else None)


class ArtifactCache:
    """Memory cache optionally backed by a directory of .npy / .json files.

    Writes go to a temporary file in the target directory followed by an
    atomic rename, so concurrent writers never expose partial files.
    """

    def __init__(self, directory=None):
        directory = directory or os.environ.get(CACHE_ENV) or None
        self.dir = Path(directory) if directory else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
        self._mem: dict = {}
        self.hits = 0
        self.misses = 0

    def _path(self, key: str, ext: str) -> Optional[Path]:
        return None if self.dir is None else self.dir / key[:2] / f"{key}{ext}"

    def get_array(self, key: str) -> Optional[np.ndarray]:
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        p = self._path(key, ".npy")
        if p is not None and p.exists():
            arr = np.load(p)
            self._mem[key] = arr
            self.hits += 1
            return arr
        self.misses += 1
        return None

    def put_array(self, key: str, arr: np.ndarray) -> None:
        self._mem[key] = arr
        p = self._path(key, ".npy")
        if p is not None:
            _atomic_write(p, lambda fh: np.save(fh, arr))

    def get_json(self, key: str):
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        p = self._path(key, ".json")
        if p is not None and p.exists():
            obj = json.loads(p.read_text())
            self._mem[key] = obj
            self.hits += 1
            return obj
        self.misses += 1
        return None

    def put_json(self, key: str, obj) -> None:
        self._mem[key] = obj
        p = self._path(key, ".json")
        if p is not None:
            _atomic_write(p, lambda fh: fh.write(json.dumps(obj).encode()))


def _atomic_write(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- feature jobs

def _features_or_empty(clip: AudioClip) -> np.ndarray:
    return clip_features(clip)[0]


def train_features(clip: AudioClip, cache: Optional[ArtifactCache] = None) -> np.ndarray:
    """Window features of a clean or augmented clip, cached by content."""
    if cache is None:
        return _features_or_empty(clip)
    key = content_key("train", _CACHE_VERSION, clip_key(clip))
    f = cache.get_array(key)
    if f is None:
        f = _features_or_empty(clip)
        cache.put_array(key, f)
    return f


def training_dataset(clips, cache: Optional[ArtifactCache] = None) -> LabeledDataset:
    """Stack window features of labeled clips; groups are the source ids."""
    parts = [(train_features(c, cache), c) for c in clips]
    if not parts:
        raise ValueError("no clips")
    X = np.concatenate([f for f, _ in parts])
    y = np.concatenate([np.full(f.shape[0], int(c.label)) for f, c in parts])
    g = np.concatenate([np.full(f.shape[0], c.source_id, dtype=object) for f, c in parts])
    return LabeledDataset(X, y, g)


@dataclass(frozen=True)
class CaptureJob:
    clip: AudioClip
    clip_index: int
    snr_index: int
    snr_db: float
    beamformer: str
    tdoa: str


def capture_features(job: CaptureJob, plan: ExperimentPlan) -> np.ndarray:
    """Simulate, beamform and featurize one (clip, snr, beamformer) cell."""
    i, j = job.clip_index, job.snr_index
    doa = clip_doa(plan.seed, i, j) if plan.redraw_doa else clip_doa(plan.seed, i)
    rec = simulate_capture(job.clip, plan.geometry, doa, job.snr_db,
                           capture_seed(plan.seed, i, j), plan.delay_mode)
    max_lag = plan.geometry.max_delay_samples(job.clip.sample_rate) + 1.0
    out = beamform(rec, job.beamformer, job.tdoa, max_lag, plan.lms, plan.delay_mode)
    return _features_or_empty(out)


def _capture_key(job: CaptureJob, plan: ExperimentPlan, ckey: str) -> str:
    return content_key("capture", _CACHE_VERSION, ckey, job.clip_index, job.snr_index, job.snr_db,
                       job.beamformer, job.tdoa, plan.seed, plan.redraw_doa, plan.delay_mode,
                       plan.geometry.to_dict(), dataclasses.asdict(plan.lms))


def _run_capture(args):
    job, plan, key, cache_dir = args
    cache = ArtifactCache(cache_dir) if cache_dir else None
    feats = capture_features(job, plan)
    if cache is not None:
        cache.put_array(key, feats)
    return key, feats


# ---------------------------------------------------------------- experiment

def load_clips(plan: ExperimentPlan) -> tuple[list[AudioClip], list[AudioClip]]:
    """Original clips and their augmented copies (copies only)."""
    if plan.dataset is not None:
        clips = load_dataset(plan.dataset)
    else:
        clips = generate_synthetic_dataset(plan.synthetic)
    if not clips:
        raise PlanError("dataset is empty")
    if "augmented" not in plan.variants:
        return clips, []
    if plan.augmented is not None:
        known = {c.source_id for c in clips}
        copies = [c for c in load_dataset(plan.augmented) if c.source_id not in known]
    else:
        copies = augment_dataset(clips, plan.augment_snrs, plan.seed)[len(clips):]
    return clips, copies


def _beam_cells(plan: ExperimentPlan):
    cells = []
    for bf in plan.beamformers:
        if bf == "none":
            cells.append(("none", "-"))
        else:
            cells.extend((bf, t) for t in plan.tdoa)
    return cells


def run_experiment(plan: ExperimentPlan, cache: Optional[ArtifactCache] = None) -> EvaluationReport:
    plan.validate()
    cache = cache or ArtifactCache(plan.cache_dir)
    clips, copies = load_clips(plan)
    ids = [c.source_id for c in clips]
    if len(set(ids)) != len(ids):
        raise PlanError("duplicate source ids in dataset")
    index_of = {s: k for k, s in enumerate(ids)}
    ckeys = [clip_key(c) for c in clips]

    original = training_dataset(clips, cache)
    augmented = None
    if copies:
        for c in copies:
            if parent_id(c.source_id) not in index_of:
                raise PlanError(f"augmented clip {c.source_id!r} has no original")
        augmented = training_dataset((clips if plan.include_originals else []) + copies, cache)

    labels = [int(c.label) for c in clips]
    splits = bootstrap_audio_splits(ids, labels, plan.bootstrap)
    test_union = sorted({index_of[s] for _, test in splits for s in test})

    # test-side features for every out-of-bag audio
    snrs = [float(s) for s in plan.snrs]
    beams = _beam_cells(plan)
    jobs = [CaptureJob(clips[i], i, j, s, bf, t)
            for i in test_union for j, s in enumerate(snrs) for bf, t in beams]
    test_feats: dict = {}
    pending = []
    for job in jobs:
        key = _capture_key(job, plan, ckeys[job.clip_index])
        f = cache.get_array(key)
        if f is None:
            pending.append((job, key))
        else:
            test_feats[(job.clip_index, job.snr_index, job.beamformer, job.tdoa)] = f
    log.info("%d capture cells, %d to compute", len(jobs), len(pending))
    if plan.workers > 1 and len(pending) > 1:
        args = [(job, plan, key, str(cache.dir) if cache.dir else None) for job, key in pending]
        with ProcessPoolExecutor(max_workers=plan.workers) as ex:
            results = list(ex.map(_run_capture, args, chunksize=4))
        for (job, _), (key, f) in zip(pending, results):
            cache._mem[key] = f
            test_feats[(job.clip_index, job.snr_index, job.beamformer, job.tdoa)] = f
    else:
        for job, key in pending:
            f = capture_features(job, plan)
            cache.put_array(key, f)
            test_feats[(job.clip_index, job.snr_index, job.beamformer, job.tdoa)] = f

    data_key = content_key(ckeys, [clip_key(c) for c in copies], plan.include_originals)
    test_key = content_key([_capture_key(job, plan, ckeys[job.clip_index]) for job in jobs])
    report = EvaluationReport(meta={"n_audios": len(clips), "n_augmented": len(copies),
                                    "n_folds": len(splits), "seed": plan.seed,
                                    "hyperparams": {}})
    for kind in plan.classifiers:
        for variant in plan.variants:
            train_all = original if variant == "original" else augmented
            tune_error = None
            try:
                hyper = _hyperparams(plan, kind, variant, train_all, cache, data_key)
            except Exception as exc:  # noqa: BLE001
                hyper, tune_error = None, f"{type(exc).__name__}: {exc}"
            report.meta["hyperparams"][f"{kind}/{variant}"] = hyper
            scores = {(bf, t, s): [] for bf, t in beams for s in snrs}
            errors = []
            for fold, (train_ids, test_ids) in enumerate(splits):
                if hyper is None:
                    errors.append(tune_error)
                    break
                res = _fold_result(plan, kind, variant, hyper, fold, train_ids, test_ids,
                                   train_all, index_of, test_feats, labels, snrs, beams,
                                   cache, data_key, test_key)
                if "error" in res:
                    errors.append(f"fold {fold}: {res['error']}")
                    continue
                for (bf, t, s), acc in zip(scores, res["acc"]):
                    scores[(bf, t, s)].append(acc)
            for (bf, t, s), vals in scores.items():
                if vals:
                    status = "ok" if not errors else "partial"
                    row = AccuracyRow(kind, bf, t, variant, s, float(np.mean(vals)),
                                      float(np.std(vals)), len(vals), status)
                else:
                    row = AccuracyRow(kind, bf, t, variant, s, float("nan"), float("nan"), 0, "failed")
                report.rows.append(row)
            for e in errors:
                report.failures.append({"classifier": kind, "variant": variant, "error": e})
    return report


def _hyperparams(plan, kind, variant, train_all, cache, data_key) -> dict:
    """Plan hyperparameters, or the gridsearch winner when the plan tunes."""
    if not plan.tune:
        return plan.hyperparams_for(kind, variant)
    by_parent = variant == "augmented"
    grid = (plan.grids or {}).get(kind, DEFAULT_GRIDS[kind])
    key = content_key("tune", _CACHE_VERSION, kind, grid, data_key, by_parent,
                      dataclasses.asdict(plan.bootstrap), plan.seed)
    hit = cache.get_json(key)
    if hit is not None:
        return hit
    res = gridsearch(kind, grid, train_all, plan.bootstrap, by_parent, plan.seed)
    if res.best_params is None:
        raise RuntimeError(f"every {kind} grid candidate failed")
    cache.put_json(key, res.best_params)
    return res.best_params


def _fold_result(plan, kind, variant, hyper, fold, train_ids, test_ids, train_all, index_of,
                 test_feats, labels, snrs, beams, cache, data_key, test_key) -> dict:
    key = content_key("fold", _CACHE_VERSION, kind, variant, hyper, fold, train_ids, test_ids,
                      data_key, test_key, plan.seed)
    hit = cache.get_json(key)
    if hit is not None:
        return hit
    train_set = set(train_ids)
    mask = np.array([parent_id(g) in train_set for g in train_all.groups])
    try:
        model = fit(kind, hyper, train_all.subset(np.flatnonzero(mask)), plan.seed)
        accs = []
        for bf, t in beams:
            for j, _ in enumerate(snrs):
                correct = 0
                for sid in test_ids:
                    i = index_of[sid]
                    X = test_feats[(i, j, bf, t)]
                    if X.shape[0] == 0:
                        continue
                    votes = np.bincount(model.predict_codes(X), minlength=N_CLASSES)
                    correct += int(np.argmax(votes) == labels[i])
                accs.append(correct / len(test_ids))
        res = {"acc": accs}
    except Exception as exc:  # noqa: BLE001 - recorded per cell, the run continues
        log.warning("%s/%s fold %d failed: %s", kind, variant, fold, exc)
        return {"error": f"{type(exc).__name__}: {exc}"}
    cache.put_json(key, res)
    return res


def exit_status(report: EvaluationReport) -> int:
    return 0 if report.complete else 1
