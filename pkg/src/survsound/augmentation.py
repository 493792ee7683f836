"""Calibrated white-noise corruption and the SNR augmentation sweep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio_io import AudioClip

DEFAULT_AUGMENT_SNRS = tuple(float(s) for s in range(-10, 31, 5))

# stream tags keep seeds of unrelated random draws from colliding
_TAG_AWGN = 1


class SilentSignalError(ValueError):
    """SNR is undefined for a zero-power signal."""


@dataclass(frozen=True)
class SnrSpec:
    snr_db: float

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")

    def noise_power(self, signal_power: float) -> float:
        return signal_power / 10.0 ** (self.snr_db / 10.0)


def _as_snr(snr) -> SnrSpec:
    return snr if isinstance(snr, SnrSpec) else SnrSpec(float(snr))


def mean_power(samples) -> float:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("mean_power of an empty sequence")
    return float(np.mean(x * x))


def measured_snr_db(clean, noisy) -> float:
    clean = np.asarray(clean, dtype=np.float64)
    return 10.0 * np.log10(mean_power(clean) / mean_power(np.asarray(noisy) - clean))


def make_rng(*key: int) -> np.random.Generator:
    """Generator seeded from an integer tuple (master seed first)."""
    return np.random.default_rng([int(k) & 0xFFFFFFFFFFFFFFFF for k in key])


def calibrated_noise(signal, snr, rng: np.random.Generator) -> np.ndarray:
    snr = _as_snr(snr)
    p = mean_power(signal)
    if p <= 0.0:
        raise SilentSignalError("cannot calibrate noise against a silent signal")
    return rng.standard_normal(np.shape(signal)) * np.sqrt(snr.noise_power(p))


def add_awgn(clip: AudioClip, snr, seed) -> AudioClip:
    """Return ``clip`` plus white Gaussian noise at the requested SNR.

    The result is not clipped to [-1, 1]. ``seed`` may be an int or a tuple of
    ints; the same seed always yields the same noise.
    """
    snr = _as_snr(snr)
    key = seed if isinstance(seed, tuple) else (seed,)
    noise = calibrated_noise(clip.samples, snr, make_rng(*key))
    sid = f"{clip.source_id}__snr{snr.snr_db:+g}"
    return clip.with_samples(clip.samples + noise, source_id=sid)


def augment_dataset(dataset: Sequence[AudioClip], snrs=DEFAULT_AUGMENT_SNRS,
                    seed: int = 0) -> list[AudioClip]:
    """Originals followed by one noisy copy per (clip, snr).

    Noise for copy (i, j) is seeded from (seed, i, j) alone, so any subset or
    ordering of the work reproduces the same copies.
    """
    snrs = [_as_snr(s) for s in snrs]
    out = list(dataset)
    for i, clip in enumerate(dataset):
        for j, snr in enumerate(snrs):
            out.append(add_awgn(clip, snr, (seed, _TAG_AWGN, i, j)))
    return out


def parse_range(text: str) -> list[float]:
    """Parse ``lo:hi:step`` (inclusive) or a comma list into SNR values."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [lo + k * step for k in range(n)]
    return [float(t) for t in text.split(",") if t.strip()]
