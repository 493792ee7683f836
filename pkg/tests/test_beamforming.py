import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from survsound.array_sim import ArrayGeometry, DirectionOfArrival, MultichannelRecording, simulate_capture
from survsound.audio_io import AudioClip
from survsound.augmentation import make_rng
from survsound.beamforming import (BLOCKING_MATRIX, BeamformerDivergedError, LmsConfig,
                                   TdoaEstimate, UndefinedCorrelationError, align_channels,
                                   beamform, block_signals, delay_and_sum, estimate_tdoa, gsc,
                                   lms_cancel, sum_no_beamforming)

from conftest import tone

SR = 16000


def shifted_recording(x, lags, noise=None):
    """Channel i is x delayed by the integer lags[i]."""
    ch = np.stack([np.roll(x, int(l)) for l in lags])
    if noise is not None:
        ch = ch + noise
    return MultichannelRecording(ch, SR, None, np.asarray(lags, float), 0.0)


def test_blocking_matrix_rows_sum_to_zero():
    assert np.array_equal(BLOCKING_MATRIX.sum(axis=1), np.zeros(3))
    assert np.linalg.matrix_rank(BLOCKING_MATRIX) == 3


def test_blocking_null_is_exact(rng):
    x = rng.standard_normal(1000)
    assert np.max(np.abs(block_signals(np.stack([x] * 4)))) == 0.0


def test_blocking_shape_mismatch():
    with pytest.raises(ValueError):
        block_signals(np.zeros((3, 10)))


def test_das_with_true_integer_lags_recovers_signal(rng):
    x = rng.standard_normal(4000)
    rec = shifted_recording(x, [0, 2, -1, 3])
    y = delay_and_sum(rec, TdoaEstimate.oracle(rec)).samples
    assert np.allclose(y[5:-5], x[5:-5])


def test_none_is_plain_average(rng):
    ch = rng.standard_normal((4, 100))
    rec = MultichannelRecording(ch, SR, None, np.zeros(4), 0.0)
    assert np.allclose(sum_no_beamforming(rec).samples, ch.mean(axis=0))


@given(lags=st.lists(st.integers(-3, 3), min_size=3, max_size=3), seed=st.integers(0, 1000))
def test_xcorr_recovers_integer_lags_noise_free(lags, seed):
    x = make_rng(seed).standard_normal(2000)
    rec = shifted_recording(x, [0] + lags)
    for method in ("xcorr", "gcc-phat"):
        est = estimate_tdoa(rec, method, max_lag=5, refine=False)
        assert np.array_equal(est.lags_samples, [0] + lags)


def test_parabolic_refinement_subsample():
    clip = AudioClip(tone(400, 0.5) + tone(1300, 0.5, amp=0.3))
    rec = simulate_capture(clip, ArrayGeometry(), DirectionOfArrival(0.4, 0.1), 60.0, 0)
    est = estimate_tdoa(rec, "xcorr", max_lag=5)
    assert np.max(np.abs(est.lags_samples - rec.true_delays_samples)) < 0.1


def test_zero_channel_raises():
    ch = np.ones((4, 50))
    ch[2] = 0.0
    rec = MultichannelRecording(ch, SR, None, np.zeros(4), 0.0)
    with pytest.raises(UndefinedCorrelationError):
        estimate_tdoa(rec)


def test_gsc_with_zero_step_equals_das_bitwise(rng):
    rec = MultichannelRecording(rng.standard_normal((4, 3000)), SR, None, np.zeros(4), 0.0)
    lags = TdoaEstimate(np.array([0.0, 0.4, -1.3, 2.0]), "given", np.ones(4))
    a = gsc(rec, lags, cfg=LmsConfig(step_size=0.0)).samples
    b = delay_and_sum(rec, lags).samples
    assert np.array_equal(a, b)


def test_lms_cancels_correlated_interference(rng):
    # d carries a filtered copy of the reference; NLMS should remove most of it
    n = 20000
    r = rng.standard_normal((1, n))
    h = np.array([0.8, -0.3, 0.1])
    d = np.convolve(r[0], h)[:n]
    e = lms_cancel(d, r, LmsConfig(taps=4, step_size=0.1))
    assert np.mean(e[-5000:] ** 2) < 1e-3 * np.mean(d ** 2)


def test_lms_matches_sample_loop_reference(rng):
    n, taps = 300, 3
    refs = rng.standard_normal((2, n))
    d = rng.standard_normal(n)
    cfg = LmsConfig(taps=taps, step_size=0.05)
    w = np.zeros((2, taps))
    out = np.empty(n)
    for t in range(n):
        r = np.array([[refs[j, t - k] if t - k >= 0 else 0.0 for k in range(taps)] for j in range(2)])
        e = d[t] - np.sum(w * r)
        out[t] = e
        w += cfg.step_size / (cfg.eps + np.sum(r * r)) * e * r
    assert np.allclose(lms_cancel(d, refs, cfg, block=64), out)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_unnormalized_lms_diverges_loudly(rng):
    refs = 100 * rng.standard_normal((3, 5000))
    with pytest.raises(BeamformerDivergedError):
        lms_cancel(rng.standard_normal(5000), refs, LmsConfig(step_size=1.0, normalized=False))


def test_lms_config_validation():
    with pytest.raises(ValueError):
        LmsConfig(taps=0)
    with pytest.raises(ValueError):
        LmsConfig(step_size=-1)


def test_beamform_dispatch(rng):
    clip = AudioClip(tone(500, 0.3))
    rec = simulate_capture(clip, ArrayGeometry(), DirectionOfArrival(0.2, 0.2), 20.0, 0)
    for mode in ("none", "das", "gsc"):
        assert len(beamform(rec, mode, "oracle")) == rec.n_samples
    with pytest.raises(ValueError):
        beamform(rec, "mvdr")


def test_alignment_rejects_nonfinite_lags(rng):
    rec = MultichannelRecording(rng.standard_normal((4, 10)), SR, None, np.zeros(4), 0.0)
    with pytest.raises(ValueError):
        align_channels(rec, TdoaEstimate(np.array([0, np.nan, 0, 0]), "x", np.ones(4)))
