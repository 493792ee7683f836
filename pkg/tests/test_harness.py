import csv
import json

import numpy as np
import pytest

from survsound.audio_io import ClassLabel
from survsound.classifiers import BootstrapConfig
from survsound.harness.experiment import (ArtifactCache, EvaluationReport, ExperimentPlan,
                                          PlanError, exit_status, run_experiment)
from survsound.harness.report import (PIVOT_SNRS, ROW_COLUMNS, emit_report, load_report, pivot,
                                      pivot_markdown, series)
from survsound.harness.synthetic import FAMILIES, SyntheticDatasetSpec, generate_synthetic_dataset
from survsound.harness.timing import measure_timing, time_calls


# ---------------------------------------------------------------- synthetic data

def test_synthetic_counts_labels_and_format():
    clips = generate_synthetic_dataset(SyntheticDatasetSpec(clips_per_class=5))
    assert len(clips) == 20
    assert sorted({c.label for c in clips}) == list(ClassLabel)
    assert all(c.sample_rate == 16000 and c.samples.ndim == 1 for c in clips)
    assert all(0.6 <= c.duration <= 1.2 for c in clips)
    assert len({c.source_id for c in clips}) == 20
    assert all(np.max(np.abs(c.samples)) <= 1.0 for c in clips)


def test_synthetic_is_deterministic_and_seeded():
    a = generate_synthetic_dataset(SyntheticDatasetSpec(2, seed=4))
    b = generate_synthetic_dataset(SyntheticDatasetSpec(2, seed=4))
    c = generate_synthetic_dataset(SyntheticDatasetSpec(2, seed=5))
    assert all(np.array_equal(x.samples, y.samples) for x, y in zip(a, b))
    assert not np.array_equal(a[0].samples, c[0].samples)


def test_synthetic_families_cover_every_class():
    assert set(FAMILIES) == set(ClassLabel)


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticDatasetSpec(clips_per_class=0)


def test_families_differ_in_spectrum():
    clips = generate_synthetic_dataset(SyntheticDatasetSpec(4, seed=1))

    def centroid(x):
        p = np.abs(np.fft.rfft(x)) ** 2
        f = np.fft.rfftfreq(x.size, 1 / 16000)
        return float((p * f).sum() / p.sum())

    by = {lab: np.mean([centroid(c.samples) for c in clips if c.label == lab]) for lab in ClassLabel}
    # rumble is the darkest family, bursts the brightest
    assert by[ClassLabel.EXPLOSION] < min(by[ClassLabel.ALARM], by[ClassLabel.CASUAL])
    assert by[ClassLabel.SHOT] > max(by[ClassLabel.ALARM], by[ClassLabel.CASUAL])


# ---------------------------------------------------------------- plans

def small_plan(**kw):
    base = dict(synthetic=SyntheticDatasetSpec(3), snrs=(0.0, 30.0), beamformers=("das",),
                classifiers=("lda",), variants=("original",), bootstrap=BootstrapConfig(2))
    base.update(kw)
    return ExperimentPlan(**base)


def test_plan_validation_errors(tmp_path):
    with pytest.raises(PlanError):
        ExperimentPlan().validate()
    with pytest.raises(PlanError):
        small_plan(beamformers=("mvdr",)).validate()
    with pytest.raises(PlanError):
        small_plan(dataset=str(tmp_path / "missing")).validate()
    with pytest.raises(PlanError):
        small_plan(hyperparams={"forest": {}}).validate()
    with pytest.raises(PlanError):
        small_plan(hyperparams={"knn/clean": {}}).validate()
    with pytest.raises(PlanError):
        small_plan(snrs=()).validate()


def test_plan_from_dict_and_file(tmp_path):
    p = tmp_path / "plan.yaml"
    p.write_text("synthetic: {clips_per_class: 3}\nsnrs: '0:30:10'\nclassifiers: knn\n"
                 "bootstrap: {repetitions: 2}\nhyperparams: {knn: {k: 1}, knn/augmented: {k: 3}}\n")
    plan = ExperimentPlan.from_file(p)
    assert plan.snrs == (0.0, 10.0, 20.0, 30.0)
    assert plan.classifiers == ("knn",)
    assert plan.hyperparams_for("knn", "original") == {"k": 1}
    assert plan.hyperparams_for("knn", "augmented") == {"k": 3}
    again = ExperimentPlan.from_dict(plan.to_dict())
    assert again.to_dict() == plan.to_dict()
    with pytest.raises(PlanError):
        ExperimentPlan.from_dict({"synthetic": {"clips_per_class": 3}, "colour": "red"})
    with pytest.raises(PlanError):
        ExperimentPlan.from_file(tmp_path / "nope.yaml")


# ---------------------------------------------------------------- experiment

def test_one_classifier_one_beamformer_two_snrs_gives_two_rows():
    report = run_experiment(small_plan())
    assert len(report.rows) == 2
    assert report.complete and exit_status(report) == 0
    for r in report.rows:
        assert 0.0 <= r.mean_accuracy <= 1.0 and r.std_accuracy >= 0.0
        assert r.n_folds == 2 and r.status == "ok"


def test_every_planned_cell_present():
    plan = small_plan(beamformers=("none", "das"), classifiers=("lda", "knn"),
                      variants=("original", "augmented"), augment_snrs=(0.0,))
    report = run_experiment(plan)
    keys = {(r.classifier, r.beamformer, r.variant, r.snr_db) for r in report.rows}
    assert len(keys) == len(report.rows) == 2 * 2 * 2 * 2


def test_failed_cells_are_marked_and_run_continues():
    plan = small_plan(classifiers=("lda", "knn"), hyperparams={"lda": {"reg": -1.0}})
    report = run_experiment(plan)
    lda = [r for r in report.rows if r.classifier == "lda"]
    knn = [r for r in report.rows if r.classifier == "knn"]
    assert all(r.status == "failed" and np.isnan(r.mean_accuracy) for r in lda)
    assert all(r.status == "ok" for r in knn)
    assert report.failures and exit_status(report) == 1


def test_rerun_is_identical_and_cache_resumes(tmp_path):
    plan = small_plan(cache_dir=str(tmp_path / "cache"))
    first = run_experiment(plan, ArtifactCache(plan.cache_dir))
    cache = ArtifactCache(plan.cache_dir)
    second = run_experiment(plan, cache)
    assert first.to_dict() == second.to_dict()
    assert cache.misses == 0 and cache.hits > 0


def test_parallel_workers_match_serial():
    serial = run_experiment(small_plan())
    parallel = run_experiment(small_plan(workers=2))
    assert serial.to_dict() == parallel.to_dict()


def test_cache_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("SURVSOUND_CACHE_DIR", str(tmp_path / "c"))
    cache = ArtifactCache()
    cache.put_array("ab" * 32, np.arange(3))
    assert (tmp_path / "c" / "ab").is_dir()
    assert np.array_equal(ArtifactCache().get_array("ab" * 32), np.arange(3))


def test_tuned_plan_records_hyperparameters():
    plan = small_plan(classifiers=("knn",), tune=True, grids={"knn": {"k": [1, 3]}})
    report = run_experiment(plan)
    assert report.meta["hyperparams"]["knn/original"]["k"] in (1, 3)


# ---------------------------------------------------------------- reports

@pytest.fixture(scope="module")
def report():
    plan = ExperimentPlan(synthetic=SyntheticDatasetSpec(3), snrs=PIVOT_SNRS,
                          beamformers=("none", "das"), classifiers=("lda",),
                          variants=("original",), bootstrap=BootstrapConfig(2))
    return run_experiment(plan)


def test_csv_has_header_and_one_line_per_row(tmp_path):
    rep = EvaluationReport(rows=[])
    full = run_experiment(small_plan())
    rep.rows = full.rows
    emit_report(rep, tmp_path, plots=False)
    lines = (tmp_path / "accuracy.csv").read_text().splitlines()
    assert lines[0].split(",") == list(ROW_COLUMNS)
    assert len(lines) == 3


def test_json_and_csv_hold_identical_values(report, tmp_path):
    emit_report(report, tmp_path)
    with open(tmp_path / "accuracy.csv") as fh:
        rows = list(csv.DictReader(fh))
    js = json.loads((tmp_path / "report.json").read_text())["rows"]
    assert len(rows) == len(js)
    for a, b in zip(rows, js):
        assert float(a["mean_accuracy"]) == b["mean_accuracy"]
        assert float(a["std_accuracy"]) == b["std_accuracy"]
        assert a["classifier"] == b["classifier"] and float(a["snr_db"]) == b["snr_db"]
    assert load_report(tmp_path / "report.json").to_dict()["rows"] == js
    assert (tmp_path / "accuracy_original.svg").read_text().lstrip().startswith("<?xml")


def test_pivot_covers_every_cell(report):
    table = pivot(report)
    assert {(r["classifier"], r["beamformer"]) for r in table} == {("lda", "none"), ("lda", "das")}
    for r in table:
        assert all(r["cells"][s] is not None for s in PIVOT_SNRS)
    md = pivot_markdown(report)
    assert "| -10 dB | 0 dB | 10 dB | 20 dB | 30 dB |" in md


def test_series_files(report, tmp_path):
    emit_report(report, tmp_path, formats=("csv",), plots=False)
    names = sorted(p.stem for p in (tmp_path / "series").glob("*.csv"))
    assert names == sorted(series(report))
    lines = (tmp_path / "series" / f"{names[0]}.csv").read_text().splitlines()
    assert lines[0] == "snr_db,mean_accuracy,std_accuracy" and len(lines) == 6


def test_unknown_format(report, tmp_path):
    with pytest.raises(ValueError):
        emit_report(report, tmp_path, formats=("xml",))


def test_unwritable_output(report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(report, blocker / "sub")


# ---------------------------------------------------------------- timing

def test_time_calls_discards_warmup_and_interleaves():
    order = []
    a = time_calls([lambda: order.append("a"), lambda: order.append("b")], runs=4, warmup=3)
    assert len(order) == 14 and order[:4] == ["a", "b", "a", "b"]
    assert all(s.shape == (4,) for s in a)
    with pytest.raises(ValueError):
        time_calls([lambda: None], runs=0)


def test_measure_timing_rows_and_ratios():
    plan = small_plan(beamformers=("das", "gsc"), classifiers=("knn", "lda"),
                      variants=("original", "augmented"), augment_snrs=(0.0, 10.0))
    rows, ratios = measure_timing(plan, runs=3, warmup=1, max_clips=4)
    stages = [r.stage for r in rows]
    assert stages == ["beamform/das", "beamform/gsc", "features", "classify/knn/original",
                      "classify/knn/augmented", "classify/lda/original", "classify/lda/augmented"]
    assert all(r.n_samples == 3 and r.mean_ms > 0 for r in rows)
    assert set(ratios) == {"gsc/das", "knn augmented/original", "lda augmented/original"}
