"""Short-time magnitude spectra shared by every spectral feature."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

FFT_SIZE = 512
HOP = 160


@dataclass(frozen=True)
class SpectralFrame:
    magnitude: np.ndarray
    frame_length: int
    hop: int
    fft_size: int
    sample_rate: int

    @property
    def frequencies(self) -> np.ndarray:
        return bin_frequencies(self.fft_size, self.sample_rate)


@lru_cache(maxsize=16)
def hann(n: int) -> np.ndarray:
    # periodic Hann, the usual STFT analysis window
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def bin_frequencies(fft_size: int, sample_rate: int) -> np.ndarray:
    f = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    f.setflags(write=False)
    return f


def n_frames(n_samples: int, hop: int = HOP) -> int:
    return 1 + n_samples // hop


def frame_starts(n_samples: int, hop: int = HOP) -> np.ndarray:
    return np.arange(n_frames(n_samples, hop)) * hop


def used_frames(n_samples: int, hop: int = HOP) -> np.ndarray:
    """Mask of frames that start inside the signal.

    Framing runs one hop past the end, so the last frame can be pure padding;
    per-window statistics leave such frames out.
    """
    return frame_starts(n_samples, hop) < n_samples


def magnitude_frames(x: np.ndarray, fft_size: int = FFT_SIZE, hop: int = HOP) -> np.ndarray:
    """Magnitude STFT of the last axis: (..., n_samples) -> (..., n_frames, n_bins).

    Frames start at 0 and step by ``hop``; the tail is zero-padded.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    nf = n_frames(n, hop)
    pad_to = (nf - 1) * hop + fft_size
    padded = np.zeros(x.shape[:-1] + (pad_to,))
    padded[..., :n] = x
    frames = np.lib.stride_tricks.sliding_window_view(padded, fft_size, axis=-1)[..., ::hop, :]
    return np.abs(np.fft.rfft(frames * hann(fft_size), axis=-1))


def stft(window, fft_size: int = FFT_SIZE, hop: int = HOP,
         sample_rate: int | None = None) -> list[SpectralFrame]:
    """Per-frame magnitude spectra of one analysis window.

    Frames that would start past the last sample (pure padding) are left out,
    matching the batch extractor.
    """
    samples = getattr(window, "samples", window)
    sr = sample_rate or getattr(window, "sample_rate", 16000)
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("cannot transform an empty window")
    mags = magnitude_frames(samples, fft_size, hop)[used_frames(samples.shape[0], hop)]
    return [SpectralFrame(m, fft_size, hop, fft_size, sr) for m in mags]


def masked_mean(values: np.ndarray, mask: np.ndarray, axis: int = -1) -> np.ndarray:
    """Mean along the frame axis restricted to ``mask`` (broadcast over that axis)."""
    shape = [1] * values.ndim
    shape[axis] = mask.shape[0]
    m = mask.reshape(shape).astype(np.float64)
    return (values * m).sum(axis=axis) / m.sum()
