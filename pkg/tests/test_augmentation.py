import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from survsound.audio_io import AudioClip, ClassLabel
from survsound.augmentation import (DEFAULT_AUGMENT_SNRS, SilentSignalError, SnrSpec, add_awgn,
                                    augment_dataset, make_rng, mean_power, measured_snr_db,
                                    parse_range)

from conftest import tone


def test_default_sweep_is_minus10_to_30_step5():
    assert DEFAULT_AUGMENT_SNRS == (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)


def test_noise_power_formula():
    assert SnrSpec(10.0).noise_power(2.0) == pytest.approx(0.2)
    assert SnrSpec(-10.0).noise_power(1.0) == pytest.approx(10.0)


def test_snr_must_be_finite():
    with pytest.raises(ValueError):
        SnrSpec(float("inf"))


def test_silent_clip_raises():
    with pytest.raises(SilentSignalError):
        add_awgn(AudioClip(np.zeros(100)), 0.0, 1)


def test_same_seed_same_noise_different_seed_differs():
    c = AudioClip(tone(440))
    assert np.array_equal(add_awgn(c, 5, 7).samples, add_awgn(c, 5, 7).samples)
    assert not np.array_equal(add_awgn(c, 5, 7).samples, add_awgn(c, 5, 8).samples)


def test_noise_is_not_clipped():
    c = AudioClip(tone(440, amp=0.99))
    assert np.max(np.abs(add_awgn(c, -10, 0).samples)) > 1.0


@given(snr=st.floats(-10, 30), seed=st.integers(0, 2**31))
def test_noise_power_matches_target_in_expectation(snr, seed):
    c = AudioClip(tone(300, seconds=1.0))
    noisy = add_awgn(c, snr, seed)
    noise = noisy.samples - c.samples
    # sample power of 16000 Gaussian draws: relative std sqrt(2/16000) ~ 1.1 %
    ratio = mean_power(noise) / SnrSpec(snr).noise_power(mean_power(c.samples))
    assert abs(ratio - 1) < 0.06


def test_measured_snr_helper():
    clean = np.ones(10)
    assert measured_snr_db(clean, clean + 0.1) == pytest.approx(20.0)


def test_augment_dataset_layout_and_ids():
    clips = [AudioClip(tone(300), 16000, ClassLabel.SHOT, "a"),
             AudioClip(tone(500), 16000, ClassLabel.ALARM, "b")]
    out = augment_dataset(clips, [0, 10], seed=3)
    assert len(out) == 6
    assert out[:2] == clips
    assert [c.source_id for c in out[2:]] == ["a__snr+0", "a__snr+10", "b__snr+0", "b__snr+10"]
    assert all(c.label == clips[i // 2].label for i, c in enumerate(out[2:]))


def test_augment_copies_independent_of_dataset_order():
    a = AudioClip(tone(300), 16000, ClassLabel.SHOT, "a")
    b = AudioClip(tone(500), 16000, ClassLabel.ALARM, "b")
    # copy (i, j) is keyed by position, so the first clip's copies agree
    first = augment_dataset([a, b], [5], 1)[2]
    alone = augment_dataset([a], [5], 1)[1]
    assert np.array_equal(first.samples, alone.samples)


def test_parse_range():
    assert parse_range("-10:30:5") == [-10, -5, 0, 5, 10, 15, 20, 25, 30]
    assert parse_range("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_range("1, 2,3") == [1, 2, 3]
    assert parse_range("") == []
    with pytest.raises(ValueError):
        parse_range("0:10:0")


def test_make_rng_keys():
    a = make_rng(0, 1, 2).standard_normal(3)
    assert np.array_equal(a, make_rng(0, 1, 2).standard_normal(3))
    assert not np.array_equal(a, make_rng(0, 2, 1).standard_normal(3))
    make_rng(-1, 2)  # negative keys are folded, not rejected
