"""Four synthetic sound families standing in for the surveillance classes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ..audio_io import AudioClip, ClassLabel
from ..augmentation import make_rng

_TAG_SYNTH = 5
PEAK = 0.5
ALARM_LEVEL_DB = (-8.0, 0.0)


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    clips_per_class: int = 20
    duration_range: tuple = (0.6, 1.2)
    sample_rate: int = 16000
    seed: int = 0
    event_to_bed_db: tuple = (10.0, 20.0)

    def __post_init__(self):
        if self.clips_per_class < 1:
            raise ValueError("clips_per_class must be at least 1")
        lo, hi = self.duration_range
        if not 0.2 <= lo <= hi:
            raise ValueError("duration range must satisfy 0.2 <= lo <= hi")


def _one_pole_lowpass(x: np.ndarray, fc: float, sr: int) -> np.ndarray:
    a = np.exp(-2.0 * np.pi * fc / sr)
    return lfilter([1.0 - a], [1.0, -a], x)


def damped_bursts(rng, n: int, sr: int) -> np.ndarray:
    """Gunshot-like: a few treble-heavy impulses with fast exponential decay."""
    t = np.arange(n) / sr
    crack = rng.standard_normal(n)
    crack = crack - _one_pole_lowpass(crack, 1000.0, sr)
    out = np.zeros(n)
    for onset in np.sort(rng.uniform(0.0, 0.7 * n / sr, size=rng.integers(2, 5))):
        tau = rng.uniform(0.02, 0.06)
        out += np.where(t >= onset, np.exp(-(t - onset) / tau), 0.0)
    return out * crack


def rumble(rng, n: int, sr: int) -> np.ndarray:
    """Explosion-like: low-passed noise plus a sub-bass tone, under a fast
    attack and a slow decay."""
    t = np.arange(n) / sr
    dur = n / sr
    fc = rng.uniform(150.0, 400.0)
    noise = _one_pole_lowpass(_one_pole_lowpass(rng.standard_normal(n), fc, sr), fc, sr)
    noise /= np.std(noise) + 1e-12
    f0 = rng.uniform(40.0, 80.0)
    body = noise + 0.8 * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    attack = rng.uniform(0.05, 0.15) * dur
    env = np.minimum(t / attack, 1.0) * np.exp(-np.maximum(t - attack, 0.0) / (0.5 * dur))
    return body * env


def siren(rng, n: int, sr: int) -> np.ndarray:
    """Alarm-like: two tones alternating at a fixed period, with harmonics."""
    t = np.arange(n) / sr
    f_lo = rng.uniform(1000.0, 2000.0)
    f_hi = f_lo * rng.uniform(1.25, 1.5)
    period = rng.uniform(0.15, 0.35)
    high = (np.floor(t / (period / 2)) % 2).astype(bool)
    freq = np.where(high, f_hi, f_lo)
    phase = 2 * np.pi * np.cumsum(freq) / sr
    return np.sin(phase) + 0.3 * np.sin(2 * phase) + 0.15 * np.sin(3 * phase)


def _voice(rng, t: np.ndarray, sr: int) -> np.ndarray:
    f0 = rng.uniform(110.0, 240.0) * (1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(4, 7) * t))
    phase = 2 * np.pi * np.cumsum(f0) / sr + rng.uniform(0, 2 * np.pi)
    voice = sum(np.sin(k * phase) / k ** 2 for k in range(1, 9))
    syllable = 0.5 * (1.0 - np.cos(2 * np.pi * rng.uniform(3.0, 5.0) * t + rng.uniform(0, 2 * np.pi)))
    return voice * syllable


def _talkers(rng, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    return _voice(rng, t, sr) + 0.6 * _voice(rng, t, sr)


def distant_alarm(rng, n: int, sr: int) -> np.ndarray:
    """A far-away siren heard over talkers; the siren is well below them."""
    talk = _talkers(rng, n, sr)
    ring = siren(rng, n, sr)
    level = 10 ** (rng.uniform(*ALARM_LEVEL_DB) / 20)
    return talk / np.std(talk) + level * ring / np.std(ring)


def distractors(rng, n: int, sr: int) -> np.ndarray:
    """Casual scene: two talkers with syllabic rhythm and a few soft knocks."""
    out = _talkers(rng, n, sr)
    for onset in rng.uniform(0.0, n / sr, size=rng.integers(1, 4)):
        k = int(onset * sr)
        m = min(n - k, int(0.03 * sr))
        out[k:k + m] += 0.5 * np.exp(-np.arange(m) / (0.005 * sr)) * np.sin(
            2 * np.pi * rng.uniform(150, 400) * np.arange(m) / sr)
    return out


FAMILIES = {
    ClassLabel.SHOT: damped_bursts,
    ClassLabel.EXPLOSION: rumble,
    ClassLabel.ALARM: distant_alarm,
    ClassLabel.CASUAL: distractors,
}


def ambient_bed(rng, n: int, sr: int) -> np.ndarray:
    """Background shared by every class: pink room tone plus an equal share
    of flat microphone hiss."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sr)
    spec /= np.sqrt(np.maximum(f, 20.0))
    pink = np.fft.irfft(spec, n)
    bed = pink / np.std(pink) + rng.standard_normal(n)
    return bed / np.std(bed)


def generate_synthetic_dataset(spec: SyntheticDatasetSpec = SyntheticDatasetSpec()) -> list[AudioClip]:
    """Clips ordered by class then index, each peak-normalised to 0.5."""
    clips = []
    sr = spec.sample_rate
    for label, make in FAMILIES.items():
        for i in range(spec.clips_per_class):
            rng = make_rng(spec.seed, _TAG_SYNTH, int(label), i)
            n = int(round(rng.uniform(*spec.duration_range) * sr))
            x = make(rng, n, sr)
            x = x / np.sqrt(np.mean(x * x))
            bed_db = rng.uniform(*spec.event_to_bed_db)
            x = x + 10 ** (-bed_db / 20) * ambient_bed(rng, n, sr)
            x = PEAK * x / np.max(np.abs(x))
            clips.append(AudioClip(x, sr, label, f"{label.slug}_{i:03d}"))
    return clips
