"""Time-domain beamformers for the four-mic array: plain sum, DaS and GSC."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal as sps

from .array_sim import MultichannelRecording, apply_fractional_delay
from .audio_io import AudioClip

BLOCKING_MATRIX = np.array([
    [1.0, -1.0, 0.0, 0.0],
    [0.0, 1.0, -1.0, 0.0],
    [0.0, 0.0, 1.0, -1.0],
])
BLOCKING_MATRIX.setflags(write=False)


class UndefinedCorrelationError(ValueError):
    pass


class BeamformerDivergedError(RuntimeError):
    """Adaptive weights became non-finite; the step size is too large."""


@dataclass(frozen=True)
class LmsConfig:
    taps: int = 16
    step_size: float = 0.01
    normalized: bool = True
    eps: float = 1e-8

    def __post_init__(self):
        if self.taps < 1:
            raise ValueError("taps must be >= 1")
        if self.step_size < 0:
            raise ValueError("step_size must be non-negative")


@dataclass(frozen=True)
class TdoaEstimate:
    lags_samples: np.ndarray
    method: str
    confidence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lags_samples", np.asarray(self.lags_samples, dtype=np.float64))
        object.__setattr__(self, "confidence", np.asarray(self.confidence, dtype=np.float64))

    @classmethod
    def oracle(cls, rec: MultichannelRecording) -> "TdoaEstimate":
        return cls(rec.true_delays_samples.copy(), "oracle", np.ones(4))

    @classmethod
    def zeros(cls) -> "TdoaEstimate":
        return cls(np.zeros(4), "none", np.ones(4))


def _parabolic(c: np.ndarray, k: int) -> float:
    if 0 < k < c.shape[0] - 1:
        a, b, d = c[k - 1], c[k], c[k + 1]
        den = a - 2 * b + d
        if den < 0:
            return 0.5 * (a - d) / den
    return 0.0


def _xcorr(x: np.ndarray, ref: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
    """Correlation c[l] = sum_t x[t] ref[t - l] together with its lag axis."""
    n = x.shape[0]
    lags = sps.correlation_lags(n, n, mode="full")
    if method == "xcorr":
        c = sps.correlate(x, ref, mode="full", method="fft")
        return c / (np.linalg.norm(x) * np.linalg.norm(ref)), lags
    if method == "gcc-phat":
        nfft = 1 << int(np.ceil(np.log2(2 * n)))
        cross = np.fft.rfft(x, nfft) * np.conj(np.fft.rfft(ref, nfft))
        cross /= np.maximum(np.abs(cross), 1e-15)
        cc = np.fft.irfft(cross, nfft)
        c = np.concatenate([cc[-(n - 1):], cc[:n]]) if n > 1 else cc[:1]
        return c, lags
    raise ValueError(f"unknown TDOA method {method!r}")


def estimate_tdoa(rec: MultichannelRecording, method: str = "xcorr",
                  max_lag: Optional[float] = None, refine: bool = True) -> TdoaEstimate:
    """Lag of every channel behind the reference, by peak-picking the correlation.

    ``max_lag`` bounds the search (defaults to the whole signal); ``refine``
    adds three-point parabolic sub-sample interpolation.
    """
    if method == "oracle":
        return TdoaEstimate.oracle(rec)
    ch = rec.channels
    ref = ch[rec.reference_index]
    if not np.any(ref):
        raise UndefinedCorrelationError("reference channel is all zeros")
    limit = rec.n_samples - 1 if max_lag is None else int(np.ceil(max_lag))
    lags_out = np.zeros(4)
    conf = np.ones(4)
    for i in range(4):
        if i == rec.reference_index:
            continue
        if not np.any(ch[i]):
            raise UndefinedCorrelationError(f"channel {i} is all zeros")
        c, lags = _xcorr(ch[i], ref, method)
        keep = np.abs(lags) <= limit
        c, lags = c[keep], lags[keep]
        k = int(np.argmax(c))
        lags_out[i] = lags[k] + (_parabolic(c, k) if refine else 0.0)
        conf[i] = c[k]
    return TdoaEstimate(lags_out, method, conf)


def _average(channels: np.ndarray) -> np.ndarray:
    return channels.sum(axis=0) * (1.0 / channels.shape[0])


def sum_no_beamforming(rec: MultichannelRecording) -> AudioClip:
    """Channels summed without alignment, scaled by 1/4 to single-mic level."""
    return AudioClip(_average(rec.channels), rec.sample_rate, rec.label, rec.source_id)


def align_channels(rec: MultichannelRecording, lags: TdoaEstimate, mode: str = "sinc") -> np.ndarray:
    lag = lags.lags_samples
    if not np.all(np.isfinite(lag)):
        raise ValueError("lags must be finite")
    return np.stack([apply_fractional_delay(rec.channels[i], -lag[i], mode) if lag[i] != 0.0
                     else rec.channels[i].copy() for i in range(4)])


def delay_and_sum(rec: MultichannelRecording, lags: TdoaEstimate, mode: str = "sinc") -> AudioClip:
    """Advance each channel by its lag, then average."""
    return AudioClip(_average(align_channels(rec, lags, mode)), rec.sample_rate,
                     rec.label, rec.source_id)


def block_signals(aligned, B: np.ndarray = BLOCKING_MATRIX) -> np.ndarray:
    aligned = np.asarray(aligned, dtype=np.float64)
    if aligned.ndim != 2:
        raise ValueError("aligned channels must be a 2-D array")
    B = np.asarray(B, dtype=np.float64)
    if B.shape[1] != aligned.shape[0]:
        raise ValueError(f"blocking matrix {B.shape} does not match {aligned.shape[0]} channels")
    return B @ aligned


def lms_cancel(d: np.ndarray, refs: np.ndarray, cfg: LmsConfig, block: int = 8192) -> np.ndarray:
    """Subtract adaptively filtered noise references from ``d``.

    One FIR of ``cfg.taps`` weights per reference, adapted every sample by
    (N)LMS with the output itself as the error.
    """
    n_ref, n = refs.shape
    taps = cfg.taps
    w = np.zeros(n_ref * taps)
    y = np.empty(n)
    mu = float(cfg.step_size)
    padded = np.concatenate([np.zeros((n_ref, taps - 1)), refs], axis=1)
    for start in range(0, n, block):
        stop = min(n, start + block)
        # row t holds b_j[t], b_j[t-1], ..., b_j[t-taps+1] for every reference j
        seg = padded[:, start:stop + taps - 1]
        win = np.lib.stride_tricks.sliding_window_view(seg, taps, axis=1)[:, :, ::-1]
        R = np.ascontiguousarray(win.transpose(1, 0, 2).reshape(stop - start, n_ref * taps))
        if cfg.normalized:
            gain = mu / (cfg.eps + np.einsum("ij,ij->i", R, R))
        else:
            gain = np.full(stop - start, mu)
        for t in range(stop - start):
            r = R[t]
            e = d[start + t] - r @ w
            y[start + t] = e
            w += (gain[t] * e) * r
        if not np.all(np.isfinite(w)):
            raise BeamformerDivergedError("LMS weights diverged; reduce the step size")
    return y


def gsc(rec: MultichannelRecording, lags: TdoaEstimate, B: np.ndarray = BLOCKING_MATRIX,
        cfg: LmsConfig = LmsConfig(), mode: str = "sinc") -> AudioClip:
    """Generalized sidelobe canceller: DaS upper path, blocked + LMS lower path."""
    aligned = align_channels(rec, lags, mode)
    y = lms_cancel(_average(aligned), block_signals(aligned, B), cfg)
    return AudioClip(y, rec.sample_rate, rec.label, rec.source_id)


BEAMFORMER_MODES = ("none", "das", "gsc")


def beamform(rec: MultichannelRecording, mode: str, tdoa: str = "xcorr",
             max_lag: Optional[float] = None, lms: LmsConfig = LmsConfig(),
             delay_mode: str = "sinc") -> AudioClip:
    """Dispatch to one of the three evaluation signals."""
    if mode == "none":
        return sum_no_beamforming(rec)
    lags = estimate_tdoa(rec, tdoa, max_lag)
    if mode == "das":
        return delay_and_sum(rec, lags, delay_mode)
    if mode == "gsc":
        return gsc(rec, lags, BLOCKING_MATRIX, lms, delay_mode)
    raise ValueError(f"unknown beamformer mode {mode!r}")
