"""Far-field four-microphone capture simulation with per-channel white noise."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .audio_io import AudioClip, ClassLabel, read_wav_channels, write_wav_channels
from .augmentation import SnrSpec, calibrated_noise, make_rng, mean_power, SilentSignalError

DEFAULT_SIM_SNRS = tuple(float(s) for s in range(-10, 31))
SPEED_OF_SOUND = 343.0

_TAG_DOA = 2
_TAG_CAPTURE = 3


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Microphone layout in meters.

    The default is a 58 mm square centred on the origin in the z=0 plane,
    an approximation of the ReSpeaker 4-Mic board; pass real coordinates for
    hardware comparisons.
    """

    mic_positions: np.ndarray = field(default_factory=lambda: square_positions(0.058))
    reference_index: int = 0
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        pos = np.asarray(self.mic_positions, dtype=np.float64)
        if pos.shape != (4, 3):
            raise ValueError(f"expected 4 mic positions in 3-D, got shape {pos.shape}")
        d = np.linalg.norm(pos[:, None] - pos[None, :], axis=-1)
        if np.any(d[np.triu_indices(4, 1)] == 0):
            raise ValueError("mic positions must be pairwise distinct")
        if not 0 <= self.reference_index < 4:
            raise ValueError("reference_index must be in 0..3")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "mic_positions", pos)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (np.array_equal(self.mic_positions, other.mic_positions)
                and self.reference_index == other.reference_index
                and self.speed_of_sound == other.speed_of_sound)

    def __hash__(self) -> int:
        return hash((self.mic_positions.tobytes(), self.reference_index, self.speed_of_sound))

    @property
    def diameter(self) -> float:
        p = self.mic_positions
        return float(np.max(np.linalg.norm(p[:, None] - p[None, :], axis=-1)))

    def max_delay_samples(self, sample_rate: int) -> float:
        return self.diameter / self.speed_of_sound * sample_rate

    def to_dict(self) -> dict:
        return {"mic_positions": self.mic_positions.tolist(),
                "reference_index": self.reference_index,
                "speed_of_sound": self.speed_of_sound}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return cls(np.asarray(d["mic_positions"], dtype=float),
                   int(d.get("reference_index", 0)),
                   float(d.get("speed_of_sound", SPEED_OF_SOUND)))

    @classmethod
    def from_file(cls, path) -> "ArrayGeometry":
        import yaml
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


def square_positions(side: float) -> np.ndarray:
    h = side / 2.0
    return np.array([[h, h, 0.0], [-h, h, 0.0], [-h, -h, 0.0], [h, -h, 0.0]])


@dataclass(frozen=True)
class DirectionOfArrival:
    azimuth: float
    elevation: float

    def __post_init__(self):
        if not 0.0 <= self.azimuth < 2 * np.pi:
            raise ValueError("azimuth must lie in [0, 2*pi)")
        if not 0.0 <= self.elevation <= np.pi / 2:
            raise ValueError("elevation must lie in [0, pi/2]")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "DirectionOfArrival":
        return cls(float(rng.uniform(0.0, 2 * np.pi)), float(rng.uniform(0.0, np.pi / 2)))


@dataclass(frozen=True)
class MultichannelRecording:
    channels: np.ndarray
    sample_rate: int
    true_doa: Optional[DirectionOfArrival]
    true_delays_samples: np.ndarray
    snr_db: float
    label: Optional[ClassLabel] = None
    source_id: str = ""
    reference_index: int = 0

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] != 4:
            raise ValueError(f"expected 4 equal-length channels, got shape {ch.shape}")
        delays = np.asarray(self.true_delays_samples, dtype=np.float64)
        if delays.shape != (4,) or delays[self.reference_index] != 0.0:
            raise ValueError("true_delays_samples needs 4 entries with 0 at the reference")
        ch.setflags(write=False)
        delays.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "true_delays_samples", delays)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


def doa_unit_vector(doa: DirectionOfArrival) -> np.ndarray:
    a, e = doa.azimuth, doa.elevation
    return np.array([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)])


def mic_delays(geometry: ArrayGeometry, doa: DirectionOfArrival, sample_rate: int) -> np.ndarray:
    """Plane-wave arrival delay of each mic relative to the reference, in samples.

    Positive means the wave reaches that mic after the reference.
    """
    u = doa_unit_vector(doa)
    rel = geometry.mic_positions - geometry.mic_positions[geometry.reference_index]
    tau = -(rel @ u) / geometry.speed_of_sound * sample_rate
    tau[geometry.reference_index] = 0.0
    return tau


def sinc_kernel(frac: float, half_width: int = 32) -> np.ndarray:
    """Hann-windowed sinc taps for tap offsets -half_width+1 .. half_width."""
    k = np.arange(-half_width + 1, half_width + 1)
    t = k - frac
    win = np.where(np.abs(t) < half_width, 0.5 * (1.0 + np.cos(np.pi * t / half_width)), 0.0)
    return np.sinc(t) * win


def apply_fractional_delay(signal, delay_samples: float, mode: str = "sinc",
                           half_width: int = 32) -> np.ndarray:
    """Delay ``signal`` by a possibly fractional number of samples, zero-filling edges."""
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[0]
    if not abs(delay_samples) < n:
        raise ValueError(f"delay {delay_samples} exceeds signal length {n}")
    if mode == "nearest":
        m = int(np.rint(delay_samples))
        y = np.zeros_like(x)
        if m >= 0:
            y[m:] = x[: n - m]
        else:
            y[: n + m] = x[-m:]
        return y
    if mode != "sinc":
        raise ValueError(f"unknown delay mode {mode!r}")
    m = int(np.floor(delay_samples))
    frac = delay_samples - m
    if frac == 0.0:
        return apply_fractional_delay(x, m, "nearest")
    h = sinc_kernel(frac, half_width)
    full = np.convolve(x, h)
    idx = np.arange(n) + half_width - 1 - m
    y = np.zeros_like(x)
    ok = (idx >= 0) & (idx < full.shape[0])
    y[ok] = full[idx[ok]]
    return y


def simulate_capture(clip: AudioClip, geometry: ArrayGeometry, doa: DirectionOfArrival,
                     snr, seed, delay_mode: str = "sinc") -> MultichannelRecording:
    """Replicate ``clip`` at each mic with its propagation delay, then add
    independent white noise per channel at ``snr`` relative to that channel."""
    snr = snr if isinstance(snr, SnrSpec) else SnrSpec(float(snr))
    if mean_power(clip.samples) <= 0:
        raise SilentSignalError("cannot simulate a capture of a silent clip")
    key = seed if isinstance(seed, tuple) else (seed,)
    rng = make_rng(*key)
    delays = mic_delays(geometry, doa, clip.sample_rate)
    channels = np.empty((4, len(clip)))
    for i in range(4):
        shifted = apply_fractional_delay(clip.samples, delays[i], delay_mode)
        channels[i] = shifted + calibrated_noise(shifted, snr, rng)
    return MultichannelRecording(channels, clip.sample_rate, doa, delays, snr.snr_db,
                                 clip.label, clip.source_id, geometry.reference_index)


def clip_doa(seed: int, clip_index: int, snr_index: Optional[int] = None) -> DirectionOfArrival:
    key = (seed, _TAG_DOA, clip_index) if snr_index is None else (seed, _TAG_DOA, clip_index, snr_index)
    return DirectionOfArrival.random(make_rng(*key))


def capture_seed(seed: int, clip_index: int, snr_index: int) -> tuple:
    return (seed, _TAG_CAPTURE, clip_index, snr_index)


def sweep_simulations(dataset: Sequence[AudioClip], geometry: ArrayGeometry,
                      snrs=DEFAULT_SIM_SNRS, seed: int = 0, delay_mode: str = "sinc",
                      redraw_doa: bool = False) -> Iterator[MultichannelRecording]:
    """Yield one recording per (clip, snr).

    By default each clip keeps one random DOA across the whole sweep;
    ``redraw_doa`` draws a fresh one per SNR instead.
    """
    snrs = list(snrs)
    for i, clip in enumerate(dataset):
        fixed = clip_doa(seed, i)
        for j, snr in enumerate(snrs):
            doa = clip_doa(seed, i, j) if redraw_doa else fixed
            yield simulate_capture(clip, geometry, doa, snr, capture_seed(seed, i, j), delay_mode)


# ---------------------------------------------------------------- persistence

def save_recording(rec: MultichannelRecording, wav_path) -> Path:
    """Write a 4-channel 16-bit WAV and a JSON sidecar carrying ground truth.

    Channels are attenuated to fit full scale; ``scale`` in the sidecar undoes it.
    """
    wav_path = Path(wav_path)
    peak = float(np.max(np.abs(rec.channels)))
    scale = peak / 0.999 if peak > 0.999 else 1.0
    write_wav_channels(rec.channels / scale, rec.sample_rate, wav_path, 16)
    meta = {
        "source_id": rec.source_id,
        "label": None if rec.label is None else rec.label.slug,
        "sample_rate": rec.sample_rate,
        "snr_db": rec.snr_db,
        "doa": None if rec.true_doa is None else {"azimuth": rec.true_doa.azimuth,
                                                  "elevation": rec.true_doa.elevation},
        "delays_samples": rec.true_delays_samples.tolist(),
        "reference_index": rec.reference_index,
        "scale": scale,
    }
    sidecar = wav_path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return sidecar


def load_recording(wav_path) -> MultichannelRecording:
    wav_path = Path(wav_path)
    meta = json.loads(wav_path.with_suffix(".json").read_text())
    channels, rate = read_wav_channels(wav_path)
    doa = meta.get("doa")
    return MultichannelRecording(
        channels * float(meta.get("scale", 1.0)), rate,
        None if doa is None else DirectionOfArrival(doa["azimuth"], doa["elevation"]),
        np.asarray(meta["delays_samples"]), float(meta["snr_db"]),
        None if meta.get("label") is None else ClassLabel.parse(meta["label"]),
        meta.get("source_id", wav_path.stem), int(meta.get("reference_index", 0)))
