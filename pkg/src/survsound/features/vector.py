"""Assembly of the 126-value per-window descriptor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..audio_io import AudioClip, window_matrix
from . import cepstral, chroma, spectral
from .stft import FFT_SIZE, HOP, magnitude_frames, used_frames

# (name, width) in storage order
LAYOUT = (
    ("rms", 1),
    ("spectral_centroid", 1),
    ("spectral_bandwidth", 1),
    ("spectral_flatness", 1),
    ("rolloff", 1),
    ("zero_crossing_rate", 1),
    ("mfcc", 19),
    ("delta", 20),
    ("delta_delta", 20),
    ("mel_spectrogram", 10),
    ("chroma_stft", 12),
    ("chroma_cqt", 12),
    ("chroma_cens", 12),
    ("tonnetz", 7),
    ("spectral_contrast", 8),
)
N_FEATURES = sum(w for _, w in LAYOUT)


def _slices():
    out, start = {}, 0
    for name, width in LAYOUT:
        out[name] = slice(start, start + width)
        start += width
    return out


SLICES = _slices()


def layout_table() -> str:
    rows = []
    for name, width in LAYOUT:
        s = SLICES[name]
        pos = f"[{s.start}]" if width == 1 else f"[{s.start}-{s.stop - 1}]"
        rows.append(f"{name:<20s} {pos}")
    return "\n".join(rows)


class NonFiniteFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} entries, got {v.shape}")
        object.__setattr__(self, "values", v)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[SLICES[name]]


def extract_batch(windows: np.ndarray, sample_rate: int = 16000) -> np.ndarray:
    """Feature matrix (n_windows, 126) for equal-length windows stacked row-wise."""
    x = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    n_win, n = x.shape
    if n_win == 0:
        return np.zeros((0, N_FEATURES))
    if n == 0:
        raise ValueError("cannot featurize empty windows")
    sr = sample_rate
    mag = magnitude_frames(x, FFT_SIZE, HOP)            # (W, F, K)
    used = used_frames(n, HOP)
    mag_u = mag[:, used]

    cen, bw, flat, roll = spectral.frame_scalars(mag_u, sr)
    mf = cepstral.frame_mfcc(mag_u, sr, n_mfcc=20, n_mels=40, fmin=0.0, fmax=sr / 2.0)
    d1 = cepstral.delta(mf, axis=-2)
    d2 = cepstral.delta(d1, axis=-2)
    mel = cepstral.log_mel(mag_u, sr, 10)
    ch_stft = chroma.frame_chroma_stft(mag_u, sr)
    contrast = spectral.frame_contrast(mag_u, sr)

    cq = chroma.fold_cqt(chroma.cqt_magnitude(x, sr))   # (W, F_cqt, 12)
    ch_cqt = chroma._max_normalize(cq).mean(axis=-2)
    cens = chroma.cens_from_chroma(cq)
    tz = chroma.tonnetz(ch_cqt)

    out = np.empty((n_win, N_FEATURES))

    def put(name, v):
        out[:, SLICES[name]] = np.reshape(v, (n_win, -1))

    put("rms", spectral.rms(x))
    put("spectral_centroid", cen.mean(axis=-1))
    put("spectral_bandwidth", bw.mean(axis=-1))
    put("spectral_flatness", flat.mean(axis=-1))
    put("rolloff", roll.mean(axis=-1))
    put("zero_crossing_rate", spectral.zero_crossing_rate(x))
    put("mfcc", mf[..., :19].mean(axis=-2))
    put("delta", d1.mean(axis=-2))
    put("delta_delta", d2.mean(axis=-2))
    put("mel_spectrogram", mel.mean(axis=-2))
    put("chroma_stft", ch_stft.mean(axis=-2))
    put("chroma_cqt", ch_cqt)
    put("chroma_cens", cens)
    put("tonnetz", tz)
    put("spectral_contrast", contrast.mean(axis=-2))

    bad = ~np.isfinite(out)
    if bad.any():
        col = int(np.argwhere(bad)[0, 1])
        name = next(nm for nm, s in SLICES.items() if s.start <= col < s.stop)
        raise NonFiniteFeatureError(f"non-finite value in feature {name!r} (index {col})")
    return out


def extract_features(window) -> FeatureVector:
    """126-value descriptor of one full-length analysis window."""
    samples = getattr(window, "samples", window)
    sr = getattr(window, "sample_rate", 16000)
    return FeatureVector(extract_batch(np.asarray(samples)[None, :], sr)[0])


def clip_features(clip: AudioClip, window_ms: float = 200.0, overlap: float = 0.5,
                  chunk: int = 256):
    """Feature matrix and window start indices for every full window of ``clip``."""
    mat, starts = window_matrix(clip, window_ms, overlap)
    if mat.shape[0] == 0:
        return np.zeros((0, N_FEATURES)), starts
    parts = [extract_batch(mat[i:i + chunk], clip.sample_rate) for i in range(0, mat.shape[0], chunk)]
    return np.concatenate(parts), starts
