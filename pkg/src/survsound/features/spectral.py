"""Time-domain and spectral-shape descriptors."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .stft import bin_frequencies

FLOOR = 1e-10


def rms(x) -> np.ndarray:
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    return np.sqrt(np.mean(x * x, axis=-1))


def zero_crossing_rate(x) -> np.ndarray:
    """Fraction of adjacent sample pairs whose sign differs (0 counts as positive)."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    pos = x >= 0
    n = x.shape[-1]
    if n < 2:
        return np.zeros(x.shape[:-1]) if x.ndim > 1 else 0.0
    return np.count_nonzero(pos[..., 1:] != pos[..., :-1], axis=-1) / (n - 1)


def frame_scalars(mag: np.ndarray, sample_rate: int, rolloff_pct: float = 0.85):
    """Per-frame centroid, bandwidth, flatness and roll-off of (..., F, K) magnitudes.

    All-zero frames give centroid/bandwidth/roll-off 0 and flatness 1.
    """
    fft_size = 2 * (mag.shape[-1] - 1)
    f = bin_frequencies(fft_size, sample_rate)
    total = mag.sum(axis=-1)
    silent = total <= 0
    safe = np.where(silent, 1.0, total)
    centroid = np.where(silent, 0.0, (mag * f).sum(axis=-1) / safe)
    spread = (mag * (f - centroid[..., None]) ** 2).sum(axis=-1) / safe
    bandwidth = np.where(silent, 0.0, np.sqrt(np.maximum(spread, 0.0)))
    floored = np.maximum(mag, FLOOR)
    flatness = np.exp(np.mean(np.log(floored), axis=-1)) / np.mean(floored, axis=-1)
    cum = np.cumsum(mag, axis=-1)
    idx = np.argmax(cum >= rolloff_pct * total[..., None], axis=-1)
    rolloff = np.where(silent, 0.0, f[idx])
    return centroid, bandwidth, flatness, rolloff


def spectral_scalars(frames, sample_rate: int | None = None):
    """Centroid (Hz), bandwidth (Hz), flatness and roll-off (Hz), averaged over frames."""
    if len(frames) == 0:
        raise ValueError("need at least one frame")
    mag = np.stack([fr.magnitude for fr in frames])
    sr = sample_rate or frames[0].sample_rate
    return tuple(float(v.mean()) for v in frame_scalars(mag, sr))


@lru_cache(maxsize=8)
def contrast_band_edges(sample_rate: int, n_bands: int = 7, fmin: float = 200.0) -> np.ndarray:
    """Edges: 0, fmin, then ``n_bands`` log-spaced sub-bands up to Nyquist."""
    nyq = sample_rate / 2.0
    e = np.concatenate([[0.0], fmin * (nyq / fmin) ** (np.arange(n_bands + 1) / n_bands)])
    e.setflags(write=False)
    return e


def frame_contrast(mag: np.ndarray, sample_rate: int, n_bands: int = 7,
                   quantile: float = 0.02) -> np.ndarray:
    """Peak-minus-valley log magnitude per band: (..., F, K) -> (..., F, n_bands + 1)."""
    fft_size = 2 * (mag.shape[-1] - 1)
    f = bin_frequencies(fft_size, sample_rate)
    edges = contrast_band_edges(sample_rate, n_bands)
    out = np.empty(mag.shape[:-1] + (n_bands + 1,))
    for b in range(n_bands + 1):
        lo, hi = edges[b], edges[b + 1]
        sel = (f >= lo) & ((f < hi) if b < n_bands else (f <= hi))
        band = np.sort(mag[..., sel], axis=-1)
        q = max(1, int(round(quantile * band.shape[-1])))
        valley = band[..., :q].mean(axis=-1)
        peak = band[..., -q:].mean(axis=-1)
        out[..., b] = np.log(np.maximum(peak, FLOOR)) - np.log(np.maximum(valley, FLOOR))
    return out


def spectral_contrast(frames, n_bands: int = 7, quantile: float = 0.02,
                      sample_rate: int | None = None) -> np.ndarray:
    mag = np.stack([fr.magnitude for fr in frames])
    sr = sample_rate or frames[0].sample_rate
    return frame_contrast(mag, sr, n_bands, quantile).mean(axis=0)
