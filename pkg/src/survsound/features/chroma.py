"""Pitch-class profiles: STFT chroma, constant-Q chroma, CENS and tonnetz."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .stft import bin_frequencies

PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
A4 = 440.0
C1 = 32.70319566257483
CQT_BINS_PER_OCTAVE = 12
CQT_OCTAVES = 7
CQT_HOP = 800
CENS_THRESHOLDS = (0.05, 0.1, 0.2, 0.4)
CENS_SMOOTH = 41


@lru_cache(maxsize=8)
def stft_fold_matrix(fft_size: int, sample_rate: int) -> np.ndarray:
    """(n_bins, 12) 0/1 map sending each non-DC bin to its nearest pitch class."""
    f = bin_frequencies(fft_size, sample_rate)
    fold = np.zeros((f.shape[0], 12))
    semis = np.round(12.0 * np.log2(f[1:] / A4)).astype(int)
    fold[np.arange(1, f.shape[0]), (semis + 9) % 12] = 1.0
    fold.setflags(write=False)
    return fold


def frame_chroma_stft(mag: np.ndarray, sample_rate: int) -> np.ndarray:
    """Max-normalised power chroma per frame; silent frames map to all ones."""
    fft_size = 2 * (mag.shape[-1] - 1)
    c = (mag * mag) @ stft_fold_matrix(fft_size, sample_rate)
    return _max_normalize(c)


def _max_normalize(c: np.ndarray) -> np.ndarray:
    peak = c.max(axis=-1, keepdims=True)
    silent = peak <= 0
    return np.where(silent, 1.0, c / np.where(silent, 1.0, peak))


def chroma_stft(frames) -> np.ndarray:
    mag = np.stack([fr.magnitude for fr in frames])
    return frame_chroma_stft(mag, frames[0].sample_rate).mean(axis=0)


# ---------------------------------------------------------------- constant-Q

def cqt_frequencies(fmin: float = C1, n_bins: int = CQT_BINS_PER_OCTAVE * CQT_OCTAVES,
                    bins_per_octave: int = CQT_BINS_PER_OCTAVE) -> np.ndarray:
    return fmin * 2.0 ** (np.arange(n_bins) / bins_per_octave)


@lru_cache(maxsize=8)
def cqt_kernel(n_samples: int, sample_rate: int, hop: int = CQT_HOP, fmin: float = C1,
               n_bins: int = CQT_BINS_PER_OCTAVE * CQT_OCTAVES,
               bins_per_octave: int = CQT_BINS_PER_OCTAVE):
    """Real and imaginary analysis matrices, each (n_samples, n_frames * n_bins).

    Frame ``j`` is centred on sample ``j * hop``; bin ``k`` uses a Hann-windowed
    complex exponential of length Q * sr / f_k, truncated to the window.
    """
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    freqs = cqt_frequencies(fmin, n_bins, bins_per_octave)
    centers = np.arange(0, n_samples + 1, hop)
    t = np.arange(n_samples)
    re = np.zeros((n_samples, centers.shape[0], n_bins))
    im = np.zeros_like(re)
    for k, fk in enumerate(freqs):
        length = int(np.ceil(q * sample_rate / fk))
        half = length / 2.0
        for j, c in enumerate(centers):
            off = t - c
            inside = np.abs(off) < half
            w = np.where(inside, 0.5 + 0.5 * np.cos(np.pi * off / half), 0.0)
            ph = 2 * np.pi * fk * off / sample_rate
            # normalised by the full (untruncated) kernel weight so levels
            # stay comparable between frames near and far from the edges
            re[:, j, k] = w * np.cos(ph) / half
            im[:, j, k] = -w * np.sin(ph) / half
    re = re.reshape(n_samples, -1)
    im = im.reshape(n_samples, -1)
    re.setflags(write=False)
    im.setflags(write=False)
    return re, im, centers.shape[0]


def cqt_magnitude(x: np.ndarray, sample_rate: int, hop: int = CQT_HOP) -> np.ndarray:
    """|CQT| of the last axis: (..., n_samples) -> (..., n_frames, n_bins)."""
    x = np.asarray(x, dtype=np.float64)
    re, im, nf = cqt_kernel(x.shape[-1], sample_rate, hop)
    flat = x.reshape(-1, x.shape[-1])
    mag = np.hypot(flat @ re, flat @ im)
    return mag.reshape(x.shape[:-1] + (nf, -1))


def fold_cqt(cqt_mag: np.ndarray, bins_per_octave: int = CQT_BINS_PER_OCTAVE) -> np.ndarray:
    """Sum CQT bins into 12 pitch classes (bin 0 is C)."""
    n_bins = cqt_mag.shape[-1]
    pcs = (np.arange(n_bins) * 12 // bins_per_octave) % 12
    fold = np.zeros((n_bins, 12))
    fold[np.arange(n_bins), pcs] = 1.0
    return cqt_mag @ fold


def chroma_cqt(window, sample_rate: int | None = None) -> np.ndarray:
    x = np.asarray(getattr(window, "samples", window), dtype=np.float64)
    sr = sample_rate or getattr(window, "sample_rate", 16000)
    return _max_normalize(fold_cqt(cqt_magnitude(x, sr))).mean(axis=-2)


def cens_from_chroma(raw: np.ndarray, smooth: int = CENS_SMOOTH) -> np.ndarray:
    """CENS vector from un-normalised per-frame chroma (..., F, 12); unit L2 norm."""
    total = raw.sum(axis=-1, keepdims=True)
    silent = total <= 0
    l1 = np.where(silent, 1.0 / 12.0, raw / np.where(silent, 1.0, total))
    quant = np.zeros_like(l1)
    for th in CENS_THRESHOLDS:
        quant += l1 > th
    nf = quant.shape[-2]
    length = min(smooth, nf)
    win = np.hanning(length + 2)[1:-1]
    win /= win.sum()
    # zero-filled 'same' convolution along the frame axis
    smoothed = np.zeros_like(quant)
    half = (length - 1) // 2
    for i, w in enumerate(win):
        shift = i - half
        src = slice(max(0, shift), nf + min(0, shift))
        dst = slice(max(0, -shift), nf - max(0, shift))
        smoothed[..., dst, :] += w * quant[..., src, :]
    norms = np.linalg.norm(smoothed, axis=-1, keepdims=True)
    frames = np.where(norms > 0, smoothed / np.where(norms > 0, norms, 1.0), 1.0 / np.sqrt(12))
    mean = frames.mean(axis=-2)
    return mean / np.linalg.norm(mean, axis=-1, keepdims=True)


def chroma_cens(window, sample_rate: int | None = None) -> np.ndarray:
    x = np.asarray(getattr(window, "samples", window), dtype=np.float64)
    sr = sample_rate or getattr(window, "sample_rate", 16000)
    return cens_from_chroma(fold_cqt(cqt_magnitude(x, sr)))


# ---------------------------------------------------------------- tonnetz

def _tonnetz_matrix() -> np.ndarray:
    pcs = np.arange(12)
    scale = np.array([7 / 6, 7 / 6, 3 / 2, 3 / 2, 2 / 3, 2 / 3])
    v = np.multiply.outer(scale, pcs)
    v[::2] -= 0.5
    radius = np.array([1.0, 1.0, 1.0, 1.0, 0.5, 0.5])
    m = radius[:, None] * np.cos(np.pi * v)
    m.setflags(write=False)
    return m


TONNETZ_MATRIX = _tonnetz_matrix()


def tonnetz(chroma) -> np.ndarray:
    """6-D tonal centroid of L1-normalised chroma plus its Euclidean norm.

    The seventh entry has no counterpart in the usual 6-D definition; it pads
    the layout to seven values.
    """
    c = np.asarray(chroma, dtype=np.float64)
    if np.any(c < 0):
        raise ValueError("chroma must be non-negative")
    total = c.sum(axis=-1, keepdims=True)
    l1 = c / np.where(total > 0, total, 1.0)
    cent = l1 @ TONNETZ_MATRIX.T
    return np.concatenate([cent, np.linalg.norm(cent, axis=-1, keepdims=True)], axis=-1)
