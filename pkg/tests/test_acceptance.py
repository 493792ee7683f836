"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line (printed, and repeated in the pytest
terminal summary) and then asserts, so an unmet criterion fails visibly.
"""

import time

import numpy as np
import pytest
from scipy.stats import multivariate_normal, spearmanr

from survsound.array_sim import (ArrayGeometry, DirectionOfArrival, MultichannelRecording,
                                 apply_fractional_delay, mic_delays, simulate_capture)
from survsound.audio_io import AudioClip, segment_windows
from survsound.augmentation import DEFAULT_AUGMENT_SNRS, augment_dataset, make_rng, measured_snr_db
from survsound.beamforming import (LmsConfig, TdoaEstimate, block_signals, delay_and_sum,
                                   estimate_tdoa, gsc)
from survsound.classifiers import (BootstrapConfig, HingeSGD, KNearestNeighbors,
                                   LinearDiscriminant, Perceptron, QuadraticDiscriminant,
                                   best_split, gini)
from survsound.classifiers.svm import KernelRows, kernel_matrix, kkt_violation, smo
from survsound.features import LAYOUT, N_FEATURES, extract_batch, extract_features, mfcc, stft, tonnetz
from survsound.features.chroma import PITCH_CLASSES
from survsound.features.spectral import frame_scalars
from survsound.harness.experiment import ArtifactCache, ExperimentPlan, run_experiment
from survsound.harness.synthetic import SyntheticDatasetSpec, generate_synthetic_dataset
from survsound.harness.timing import measure_timing

from conftest import record_criterion, tone

SR = 16000
WIDTHS = (1, 1, 1, 1, 1, 1, 19, 20, 20, 10, 12, 12, 12, 7, 8)
EDGE = 16  # samples trimmed at both ends, beyond any integer shift of the array


@pytest.fixture(scope="module")
def clips():
    return generate_synthetic_dataset(SyntheticDatasetSpec(clips_per_class=20))


# ---------------------------------------------------------------- 1. array gain

def test_criterion_1_das_array_gain(clips):
    t0 = time.perf_counter()
    geom = ArrayGeometry()
    gains = {}
    for snr in (-10.0, 0.0, 10.0, 20.0):
        for seed in range(20):
            clip = clips[(seed * 7) % len(clips)]
            doa = DirectionOfArrival.random(make_rng(seed, 11))
            rec = simulate_capture(clip, geom, doa, snr, (seed, 12, int(snr)), "nearest")
            lags = np.rint(rec.true_delays_samples)
            inner = slice(EDGE, -EDGE)
            clean = np.stack([apply_fractional_delay(clip.samples, d, "nearest") for d in lags])
            p_sig = np.mean(clip.samples[inner] ** 2)
            p_in = np.mean((rec.channels - clean)[:, inner] ** 2)
            out = delay_and_sum(rec, TdoaEstimate(lags, "oracle", np.ones(4)), "nearest").samples
            p_out = np.mean((out - clip.samples)[inner] ** 2)
            gains[(snr, seed)] = 10 * np.log10(p_sig / p_out) - 10 * np.log10(p_sig / p_in)
    g = np.array(list(gains.values()))
    elapsed = time.perf_counter() - t0
    ok = bool(np.all(np.abs(g - 6.02) <= 0.5)) and elapsed < 60
    record_criterion(1, ok, f"DaS gain {g.min():.3f}..{g.max():.3f} dB (target 6.02 +/- 0.5) "
                            f"over 80 captures in {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 2. TDOA

def test_criterion_2_tdoa_recovery(clips):
    t0 = time.perf_counter()
    geom = ArrayGeometry()
    max_lag = geom.max_delay_samples(SR) + 1.0
    hits = 0
    trials = 500
    for t in range(trials):
        rng = make_rng(2024, t)
        clip = clips[int(rng.integers(len(clips)))]
        doa = DirectionOfArrival.random(rng)
        rec = simulate_capture(clip, geom, doa, 10.0, (2024, t, 1), "nearest")
        est = estimate_tdoa(rec, "xcorr", max_lag, refine=False)
        hits += bool(np.array_equal(est.lags_samples, np.rint(rec.true_delays_samples)))
    elapsed = time.perf_counter() - t0
    rate = hits / trials
    ok = rate >= 0.99 and elapsed < 120
    record_criterion(2, ok, f"exact integer lags in {hits}/{trials} trials ({rate:.1%}) at 10 dB "
                            f"in {elapsed:.1f} s")
    assert ok


# ---------------------------------------------------------------- 3. blocking null

def test_criterion_3_blocking_null_and_gsc_limit(clips):
    rng = np.random.default_rng(3)
    s = rng.standard_normal(SR)
    null = float(np.max(np.abs(block_signals(np.stack([s] * 4)))))
    rec = simulate_capture(clips[0], ArrayGeometry(), DirectionOfArrival(1.0, 0.3), 5.0, 3)
    lags = TdoaEstimate.oracle(rec)
    same = np.array_equal(gsc(rec, lags, cfg=LmsConfig(step_size=0.0)).samples,
                          delay_and_sum(rec, lags).samples)
    ok = null == 0.0 and same
    record_criterion(3, ok, f"blocking max |y| = {null!r}; GSC(mu=0) == DaS bitwise: {same}")
    assert ok


# ---------------------------------------------------------------- 4. GSC on noise

def test_criterion_4_gsc_noise_reduction():
    geom = ArrayGeometry()
    wins = 0
    ratios = []
    for seed in range(20):
        rng = make_rng(4, seed)
        doa = DirectionOfArrival.random(rng)
        delays = mic_delays(geom, doa, SR)
        rec = MultichannelRecording(rng.standard_normal((4, 2 * SR)), SR, doa, delays, float("-inf"))
        lags = TdoaEstimate.oracle(rec)
        tail = slice(SR, None)  # second half, after convergence
        p_gsc = np.mean(gsc(rec, lags).samples[tail] ** 2)
        p_das = np.mean(delay_and_sum(rec, lags).samples[tail] ** 2)
        wins += p_gsc < p_das
        ratios.append(10 * np.log10(p_gsc / p_das))
    ok = wins >= 18
    record_criterion(4, ok, f"GSC below DaS in {wins}/20 runs; GSC-DaS power "
                            f"{np.mean(ratios):+.4f} dB mean (needs >= 18/20)")
    assert ok


# ---------------------------------------------------------------- 5. AWGN

def test_criterion_5_awgn_calibration(clips):
    clip = AudioClip(np.resize(clips[0].samples, SR), SR, clips[0].label, clips[0].source_id)
    copies = augment_dataset([clip], DEFAULT_AUGMENT_SNRS, seed=0)[1:]
    errs = np.array([measured_snr_db(clip.samples, c.samples) - s
                     for c, s in zip(copies, DEFAULT_AUGMENT_SNRS)])
    # how often a single one-second realization misses the band, for context
    spread = np.array([measured_snr_db(clip.samples, c.samples) - s
                       for seed in range(1, 201)
                       for c, s in zip(augment_dataset([clip], DEFAULT_AUGMENT_SNRS, seed=seed)[1:],
                                       DEFAULT_AUGMENT_SNRS)])
    ok = errs.size == 9 and bool(np.all(np.abs(errs) <= 0.1))
    record_criterion(5, ok, f"max |measured - target| = {np.max(np.abs(errs)):.4f} dB over the 9 "
                            f"targets (master seed); {np.mean(np.abs(spread) > 0.1):.1%} of "
                            f"{spread.size} other realizations exceed 0.1 dB")
    assert ok


# ---------------------------------------------------------------- 6. features

def test_criterion_6_feature_layout(clips):
    windows = np.stack([w.samples for c in clips for w in segment_windows(c)])
    X = extract_batch(windows)
    layout_ok = (X.shape == (windows.shape[0], 126) and N_FEATURES == 126
                 and tuple(w for _, w in LAYOUT) == WIDTHS and bool(np.all(np.isfinite(X))))

    frames = stft(tone(2000, 0.2))
    cen = frame_scalars(np.stack([f.magnitude for f in frames[:17]]), SR)[0]
    centroid_ok = bool(np.allclose(cen, 2000, atol=1))
    silence = mfcc(stft(np.zeros(3200)), n_mels=40, n_mfcc=19)
    silence_ok = (silence[0] == pytest.approx(np.sqrt(40) * np.log(1e-10))
                  and bool(np.allclose(silence[1:], 0.0, atol=1e-9)))
    a440 = extract_features(tone(440, 0.2))
    chroma_ok = all(PITCH_CLASSES[int(np.argmax(a440[k]))] == "A"
                    for k in ("chroma_stft", "chroma_cqt", "chroma_cens"))
    tonnetz_ok = bool(np.allclose(tonnetz(np.ones(12)), 0.0, atol=1e-12))
    ok = layout_ok and centroid_ok and silence_ok and chroma_ok and tonnetz_ok
    record_criterion(6, ok, f"{X.shape[0]} vectors of width {X.shape[1]}, layout {layout_ok}; "
                            f"centroid {centroid_ok}, silence MFCC {silence_ok}, "
                            f"A440 chroma {chroma_ok}, tonnetz zero {tonnetz_ok}")
    assert ok


# ---------------------------------------------------------------- 7. classifiers

def _brute_knn(Xtr, ytr, Xte, k):
    d = ((Xte[:, None, :] - Xtr[None, :, :]) ** 2).sum(-1)
    out = []
    for row in d:
        order = sorted(range(row.size), key=lambda i: (row[i], i))[:k]
        votes = np.bincount(ytr[order], minlength=4)
        out.append(int(np.argmax(votes)))
    return np.array(out)


def _bayes_gap(cls, mus, covs, rng, n=10000):
    def draw():
        X = np.concatenate([rng.multivariate_normal(m, c, n // 2) for m, c in zip(mus, covs)])
        return X, np.repeat([0, 1], n // 2)
    X, y = draw()
    Xt, yt = draw()
    bayes = np.argmax(np.stack([multivariate_normal(m, c).logpdf(Xt) for m, c in zip(mus, covs)], 1), 1)
    acc = np.mean(cls(reg=1e-8).fit(X, y, 2).predict(Xt) == yt)
    return abs(acc - np.mean(bayes == yt))


def _brute_gain(X, y, k):
    parent = gini(np.bincount(y, minlength=k))
    best = -np.inf
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for t in (vals[:-1] + vals[1:]) / 2:
            left = X[:, f] <= t
            nl = left.sum()
            best = max(best, parent - nl / len(y) * gini(np.bincount(y[left], minlength=k))
                       - (len(y) - nl) / len(y) * gini(np.bincount(y[~left], minlength=k)))
    return best


def test_criterion_7_classifier_oracles():
    rng = np.random.default_rng(7)
    checks = {}

    knn_ok = True
    for trial in range(50):
        Xtr = rng.integers(0, 3, (30, 2)).astype(float)
        ytr = rng.integers(0, 4, 30)
        Xte = rng.integers(0, 3, (10, 2)).astype(float)
        k = 1 + trial % 7
        knn_ok &= np.array_equal(KNearestNeighbors(k).fit(Xtr, ytr, 4).predict(Xte),
                                 _brute_knn(Xtr, ytr, Xte, k))
    checks["knn exact"] = bool(knn_ok)

    cov = np.array([[1.0, 0.6], [0.6, 2.0]])
    lda_gap = _bayes_gap(LinearDiscriminant, [np.zeros(2), np.array([1.5, 1.0])], [cov, cov], rng)
    qda_gap = _bayes_gap(QuadraticDiscriminant, [np.zeros(2), np.array([1.0, 0.5])],
                         [np.eye(2) * 0.5, np.array([[3.0, 1.0], [1.0, 2.0]])], rng)
    checks[f"lda gap {lda_gap:.4f}"] = lda_gap <= 0.02
    checks[f"qda gap {qda_gap:.4f}"] = qda_gap <= 0.02

    X = np.concatenate([8.0 * np.eye(4)[c] + rng.standard_normal((100, 4)) for c in range(4)])
    y = np.repeat(np.arange(4), 100)
    for name, cls in (("perceptron", Perceptron), ("sgd", HingeSGD)):
        acc = np.mean(cls(epochs=50).fit(X, y, 4).predict(X) == y)
        checks[f"{name} train {acc:.3f}"] = acc >= 0.99

    Xb = np.concatenate([rng.standard_normal((40, 3)), rng.standard_normal((40, 3)) + 1.5])
    t = np.repeat([-1.0, 1.0], 40)
    worst = 0.0
    for kernel in ("linear", "rbf"):
        alpha, rho, _ = smo(KernelRows(Xb, kernel, 0.5), t, 1.0, tol=1e-4)
        worst = max(worst, kkt_violation(kernel_matrix(Xb, Xb, kernel, 0.5), t, alpha, rho, 1.0))
    checks[f"svm kkt {worst:.1e}"] = worst < 1e-3

    Xs = np.array([[0.0, 0.0], [1.0, 0.2], [0.2, 1.1], [2.0, 2.0], [2.2, 1.4], [1.0, 1.0]])
    ys = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])
    alpha, rho, _ = smo(KernelRows(Xs, "linear", 0.0), ys, 1.0, tol=1e-6)
    w = (alpha * ys) @ Xs
    obj = 0.5 * w @ w + np.sum(np.maximum(0.0, 1.0 - ys * (Xs @ w - rho)))
    g = np.linspace(-4, 4, 161)
    W1, W2, B = np.meshgrid(g, g, g, indexing="ij")
    m = ys[:, None, None, None] * (Xs[:, 0, None, None, None] * W1 + Xs[:, 1, None, None, None] * W2 + B)
    dense = float((0.5 * (W1 ** 2 + W2 ** 2) + np.maximum(0.0, 1.0 - m).sum(0)).min())
    checks["svm dense search"] = dense - 0.05 <= obj <= dense + 1e-6

    tree_ok = True
    for _ in range(100):
        Xt = rng.integers(0, 5, (12, 3)).astype(float)
        yt = rng.integers(0, 3, 12)
        res = best_split(Xt, yt, 3, 1)
        brute = _brute_gain(Xt, yt, 3)
        tree_ok &= (brute == -np.inf) if res is None else abs(res[0] - brute) < 1e-12
    checks["tree split maximal"] = bool(tree_ok)

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_criterion(7, ok, "; ".join(checks) + ("" if ok else f"; failed: {failed}"))
    assert ok


# ---------------------------------------------------------------- 8. end to end

# Fixed by gridsearch on the synthetic set; kept frozen so the check is not
# also a test of the tuner.
FROZEN = {"svm": {"C": 0.1, "kernel": "linear"}, "knn": {"k": 1},
          "sgd": {"alpha": 1e-5, "epochs": 20}}
SNRS = (-10.0, 0.0, 10.0, 20.0, 30.0)


def table2_plan():
    return ExperimentPlan(synthetic=SyntheticDatasetSpec(clips_per_class=20), snrs=SNRS,
                          beamformers=("none", "das"), classifiers=("svm", "knn", "sgd"),
                          variants=("original", "augmented"), hyperparams=FROZEN,
                          bootstrap=BootstrapConfig(repetitions=10), seed=0)


@pytest.fixture(scope="module")
def table2(tmp_path_factory):
    t0 = time.perf_counter()
    report = run_experiment(table2_plan(), ArtifactCache(tmp_path_factory.mktemp("c8")))
    return report, time.perf_counter() - t0


def _acc(report, clf, bf, variant, snr):
    (row,) = [r for r in report.rows if (r.classifier, r.beamformer, r.variant, r.snr_db)
              == (clf, bf, variant, snr)]
    return row.mean_accuracy


@pytest.mark.slow
def test_criterion_8_end_to_end(table2):
    report, elapsed = table2
    assert report.complete
    clfs, variants = ("svm", "knn", "sgd"), ("original", "augmented")

    a = {(c, v): _acc(report, c, "das", v, 30.0) for c in clfs for v in variants}
    a_ok = all(x >= 0.95 for x in a.values())

    rho = {}
    for c in clfs:
        for v in variants:
            for bf in ("das", "none"):
                acc = [_acc(report, c, bf, v, s) for s in SNRS]
                rho[(c, bf, v)] = spearmanr(SNRS, acc)[0]
    # the monotone-trend property is stated for DaS curves
    b_bad = {k: r for k, r in rho.items() if k[1] == "das" and not r >= 0.8}
    b_ok = not b_bad

    c_bad = [(c, v, s) for c in clfs for v in variants for s in (-10.0, 0.0)
             if _acc(report, c, "das", v, s) < _acc(report, c, "none", v, s)]
    c_ok = not c_bad

    d = {bf: (_acc(report, "svm", bf, "augmented", -10.0), _acc(report, "svm", bf, "original", -10.0))
         for bf in ("none", "das")}
    d_ok = all(aug > orig for aug, orig in d.values())

    time_ok = elapsed < 15 * 60
    ok = a_ok and b_ok and c_ok and d_ok and time_ok
    detail = (f"(a) min DaS@30dB {min(a.values()):.3f} {'ok' if a_ok else 'FAIL'}; "
              f"(b) DaS Spearman min {min(r for k, r in rho.items() if k[1] == 'das'):.3f} "
              f"{'ok' if b_ok else 'FAIL ' + str({'/'.join(k): round(float(r), 3) for k, r in b_bad.items()})}; "
              f"(c) {'ok' if c_ok else 'FAIL ' + str(c_bad)}; "
              f"(d) svm@-10dB aug/orig DaS {d['das'][0]:.3f}/{d['das'][1]:.3f} "
              f"{'ok' if d_ok else 'FAIL'}; runtime {elapsed:.0f} s")
    record_criterion(8, ok, detail)
    assert ok


# ---------------------------------------------------------------- 9. timing

TIMING_RUNS = 200


@pytest.mark.slow
def test_criterion_9_timing_ordering(tmp_path):
    plan = ExperimentPlan(synthetic=SyntheticDatasetSpec(clips_per_class=20),
                          beamformers=("das", "gsc"), classifiers=("knn", "lda", "qda", "tree"),
                          variants=("original", "augmented"),
                          hyperparams={"knn": {"k": 1},
                                       "tree/original": {"max_depth": 5, "min_samples_leaf": 5},
                                       "tree/augmented": {"max_depth": 10, "min_samples_leaf": 20}},
                          seed=0)
    _, ratios = measure_timing(plan, ArtifactCache(tmp_path), runs=TIMING_RUNS)
    gsc_ok = ratios["gsc/das"] > 1.0
    knn_ok = ratios["knn augmented/original"] > 1.0
    flat = {k: ratios[f"{k} augmented/original"] for k in ("lda", "qda", "tree")}
    flat_ok = all(0.8 <= r <= 1.2 for r in flat.values())
    ok = gsc_ok and knn_ok and flat_ok
    record_criterion(9, ok, f"gsc/das {ratios['gsc/das']:.2f}x; knn aug/orig "
                            f"{ratios['knn augmented/original']:.2f}x; "
                            + ", ".join(f"{k} {r:.3f}" for k, r in flat.items())
                            + f" ({TIMING_RUNS} runs)")
    assert ok


# ---------------------------------------------------------------- 10. determinism

@pytest.mark.slow
def test_criterion_10_determinism(table2, tmp_path):
    first, _ = table2
    second = run_experiment(table2_plan(), ArtifactCache(tmp_path))
    # repr keeps every bit of the floats and compares NaN equal to NaN
    a = [repr(r.as_tuple()) for r in first.rows]
    b = [repr(r.as_tuple()) for r in second.rows]
    same = a == b
    record_criterion(10, same, f"{len(b)} rows recomputed from scratch, identical: {same}")
    assert same
