"""Mel filterbanks, MFCCs and their regression deltas."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.fft import dct

FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-mel filters, shape (n_mels, fft_size // 2 + 1), peak weight 1."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    f = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (f - lo) / (mid - lo)
    down = (hi - f) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(up, down))
    fb.setflags(write=False)
    return fb


def log_mel(mag: np.ndarray, sample_rate: int, n_mels: int,
            fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Natural-log mel band energies of (..., K) magnitudes, floored at 1e-10."""
    fft_size = 2 * (mag.shape[-1] - 1)
    fb = mel_filterbank(n_mels, fft_size, sample_rate, fmin, fmax)
    return np.log(np.maximum((mag * mag) @ fb.T, FLOOR))


def frame_mfcc(mag: np.ndarray, sample_rate: int, n_mfcc: int = 20, n_mels: int = 40,
               fmin: float = 0.0, fmax: float = 8000.0) -> np.ndarray:
    return dct(log_mel(mag, sample_rate, n_mels, fmin, fmax), type=2, norm="ortho",
               axis=-1)[..., :n_mfcc]


def delta(traj: np.ndarray, width: int = 2, axis: int = -2) -> np.ndarray:
    """Regression-slope delta along ``axis`` with edge frames replicated.

    d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2), n = 1..width.
    """
    traj = np.moveaxis(np.asarray(traj, dtype=np.float64), axis, -1)
    if traj.shape[-1] < 1:
        raise ValueError("delta needs at least one frame")
    pad = [(0, 0)] * (traj.ndim - 1) + [(width, width)]
    p = np.pad(traj, pad, mode="edge")
    n_t = traj.shape[-1]
    num = np.zeros_like(traj)
    for n in range(1, width + 1):
        num += n * (p[..., width + n:width + n + n_t] - p[..., width - n:width - n + n_t])
    den = 2.0 * sum(n * n for n in range(1, width + 1))
    return np.moveaxis(num / den, -1, axis)


def _stack(frames):
    mag = np.stack([fr.magnitude for fr in frames])
    return mag, frames[0].sample_rate


def mfcc(frames, n_mels: int = 40, n_mfcc: int = 19, fmin: float = 0.0,
         fmax: float = 8000.0) -> np.ndarray:
    mag, sr = _stack(frames)
    return frame_mfcc(mag, sr, n_mfcc, n_mels, fmin, fmax).mean(axis=0)


def deltas(frame_mfcc_sequence) -> tuple[np.ndarray, np.ndarray]:
    """Mean delta and delta-delta of a (n_frames, n_coeffs) MFCC trajectory."""
    traj = np.asarray(frame_mfcc_sequence, dtype=np.float64)
    if traj.ndim != 2 or traj.shape[0] < 1:
        raise ValueError("expected a non-empty (n_frames, n_coeffs) trajectory")
    d1 = delta(traj, axis=0)
    d2 = delta(d1, axis=0)
    return d1.mean(axis=0), d2.mean(axis=0)


def mel_spectrogram_bands(frames, n_bands: int = 10) -> np.ndarray:
    mag, sr = _stack(frames)
    return log_mel(mag, sr, n_bands).mean(axis=0)
