"""WAV ingestion, clip containers and analysis-window segmentation."""

from __future__ import annotations

import csv
import enum
import logging
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE = 16000


class AudioFormatError(ValueError):
    """The file is a WAV but not an encoding we can read (non-PCM, odd depth)."""


class EmptyAudioError(ValueError):
    """The WAV payload holds no samples."""


class ClassLabel(enum.IntEnum):
    SHOT = 0
    EXPLOSION = 1
    ALARM = 2
    CASUAL = 3

    @classmethod
    def parse(cls, value) -> "ClassLabel":
        if isinstance(value, ClassLabel):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        return cls[text.upper()]

    @property
    def slug(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE
    label: Optional[ClassLabel] = None
    source_id: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"clip samples must be 1-D, got shape {x.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if self.label is not None:
            object.__setattr__(self, "label", ClassLabel.parse(self.label))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray, source_id: Optional[str] = None) -> "AudioClip":
        return AudioClip(samples, self.sample_rate, self.label,
                         self.source_id if source_id is None else source_id)


@dataclass(frozen=True)
class Window:
    samples: np.ndarray
    start_sample: int
    parent_id: str = ""
    sample_rate: int = DEFAULT_SAMPLE_RATE


# ---------------------------------------------------------------- WAV codec

def read_wav(path) -> AudioClip:
    """Read an 8-bit unsigned or 16-bit signed PCM WAV as a mono float clip.

    Multichannel files are averaged down to one channel.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    channels, rate = read_wav_channels(path)
    mono = channels[0] if channels.shape[0] == 1 else channels.mean(axis=0)
    return AudioClip(mono, rate, source_id=path.stem)


def read_wav_channels(path) -> tuple[np.ndarray, int]:
    """Return (channels, sample_rate) with channels shaped (n_channels, n_samples)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_ch = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        # the stdlib reader only understands WAVE_FORMAT_PCM
        raise AudioFormatError(f"{path}: not a PCM WAV ({exc})") from exc
    except EOFError as exc:
        raise EmptyAudioError(f"{path}: truncated or empty WAV") from exc

    if width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    else:
        raise AudioFormatError(f"{path}: unsupported sample width {8 * width} bits")
    if data.size == 0:
        raise EmptyAudioError(f"{path}: zero-length payload")
    n = data.size // n_ch
    return data[: n * n_ch].reshape(n, n_ch).T.copy(), rate


def _quantize(x: np.ndarray, bit_depth: int) -> bytes:
    x = np.asarray(x, dtype=np.float64)
    if bit_depth == 8:
        q = np.clip(np.round(x * 128.0) + 128.0, 0, 255).astype(np.uint8)
        return q.tobytes()
    if bit_depth == 16:
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        return q.tobytes()
    raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")


def write_wav_channels(channels: np.ndarray, sample_rate: int, path, bit_depth: int = 16) -> None:
    channels = np.atleast_2d(np.asarray(channels, dtype=np.float64))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    interleaved = channels.T.reshape(-1)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels.shape[0])
        wf.setsampwidth(bit_depth // 8)
        wf.setframerate(int(sample_rate))
        wf.writeframes(_quantize(interleaved, bit_depth))


def write_wav(clip: AudioClip, path, bit_depth: int = 16) -> None:
    write_wav_channels(clip.samples[None, :], clip.sample_rate, path, bit_depth)


# ---------------------------------------------------------------- windows

def window_length(sample_rate: int, window_ms: float = 200.0) -> int:
    return int(round(sample_rate * window_ms / 1000.0))


def window_starts(n_samples: int, win: int, hop: int) -> np.ndarray:
    if n_samples < win:
        return np.zeros(0, dtype=int)
    return np.arange(0, n_samples - win + 1, hop)


def segment_windows(clip: AudioClip, window_ms: float = 200.0, overlap: float = 0.5) -> list[Window]:
    """Cut a clip into full-length overlapping windows; the short tail is dropped."""
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must lie in [0, 1)")
    win = window_length(clip.sample_rate, window_ms)
    hop = max(1, int(round(win * (1.0 - overlap))))
    return [Window(clip.samples[s:s + win], int(s), clip.source_id, clip.sample_rate)
            for s in window_starts(len(clip), win, hop)]


def window_matrix(clip: AudioClip, window_ms: float = 200.0, overlap: float = 0.5):
    """Same segmentation as :func:`segment_windows`, stacked as (n_windows, win)."""
    win = window_length(clip.sample_rate, window_ms)
    hop = max(1, int(round(win * (1.0 - overlap))))
    starts = window_starts(len(clip), win, hop)
    if starts.size == 0:
        return np.zeros((0, win)), starts
    idx = starts[:, None] + np.arange(win)[None, :]
    return clip.samples[idx], starts


# ---------------------------------------------------------------- datasets

@dataclass
class DatasetEntry:
    path: Path
    label: ClassLabel
    scale: float = 1.0


def scan_class_dirs(root) -> list[DatasetEntry]:
    root = Path(root)
    entries = []
    for label in ClassLabel:
        sub = root / label.slug
        if not sub.is_dir():
            continue
        for p in sorted(sub.glob("*.wav")):
            entries.append(DatasetEntry(p, label))
    return entries


def read_manifest(path) -> list[DatasetEntry]:
    """Read a ``path,label[,scale]`` CSV; relative paths resolve against its folder."""
    path = Path(path)
    entries = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            p = Path(row["path"])
            if not p.is_absolute():
                p = path.parent / p
            entries.append(DatasetEntry(p, ClassLabel.parse(row["label"]),
                                        float(row.get("scale") or 1.0)))
    return entries


def write_manifest(entries: Iterable[DatasetEntry], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "label", "scale"])
        for e in entries:
            try:
                rel = e.path.relative_to(path.parent)
            except ValueError:
                rel = e.path
            w.writerow([str(rel), e.label.slug, repr(float(e.scale))])


def load_dataset(source, sample_rate: int = DEFAULT_SAMPLE_RATE,
                 window_ms: float = 200.0) -> list[AudioClip]:
    """Load labeled clips from a class-per-folder tree or a manifest CSV.

    A sample-rate mismatch is fatal; clips too short for a single window are
    skipped with a warning.
    """
    source = Path(source)
    if source.is_dir():
        manifest = source / "manifest.csv"
        entries = read_manifest(manifest) if manifest.exists() else scan_class_dirs(source)
    else:
        entries = read_manifest(source)
    min_len = window_length(sample_rate, window_ms)
    clips = []
    for e in entries:
        clip = read_wav(e.path)
        if clip.sample_rate != sample_rate:
            raise ValueError(f"{e.path}: sample rate {clip.sample_rate} != {sample_rate}")
        if len(clip) < min_len:
            log.warning("skipping %s: shorter than one %g ms window", e.path, window_ms)
            continue
        clips.append(AudioClip(clip.samples * e.scale, clip.sample_rate, e.label, e.path.stem))
    return clips


def save_dataset(clips: Sequence[AudioClip], out_dir, bit_depth: int = 16) -> Path:
    """Write clips as ``<label>/<source_id>.wav`` plus ``manifest.csv``.

    Clips peaking above full scale are attenuated before quantization and the
    attenuation is recorded in the manifest's ``scale`` column.
    """
    out_dir = Path(out_dir)
    entries = []
    for clip in clips:
        if clip.label is None:
            raise ValueError(f"clip {clip.source_id!r} has no label")
        peak = float(np.max(np.abs(clip.samples))) if len(clip) else 0.0
        scale = peak / 0.999 if peak > 0.999 else 1.0
        p = out_dir / clip.label.slug / f"{clip.source_id}.wav"
        write_wav(clip.with_samples(clip.samples / scale), p, bit_depth)
        entries.append(DatasetEntry(p, clip.label, scale))
    manifest = out_dir / "manifest.csv"
    write_manifest(entries, manifest)
    return manifest
