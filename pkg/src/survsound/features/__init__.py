"""Per-window audio descriptors."""

from .cepstral import deltas, mel_spectrogram_bands, mfcc
from .chroma import chroma_cens, chroma_cqt, chroma_stft, tonnetz
from .normalize import Normalizer, apply_normalizer, fit_normalizer
from .spectral import rms, spectral_contrast, spectral_scalars, zero_crossing_rate
from .stft import SpectralFrame, stft
from .vector import (LAYOUT, N_FEATURES, SLICES, FeatureVector, NonFiniteFeatureError,
                     clip_features, extract_batch, extract_features, layout_table)

__all__ = [
    "FeatureVector", "LAYOUT", "N_FEATURES", "NonFiniteFeatureError", "Normalizer", "SLICES",
    "SpectralFrame", "apply_normalizer", "chroma_cens", "chroma_cqt", "chroma_stft",
    "clip_features", "deltas", "extract_batch", "extract_features", "fit_normalizer",
    "layout_table", "mel_spectrogram_bands", "mfcc", "rms", "spectral_contrast",
    "spectral_scalars", "stft", "tonnetz", "zero_crossing_rate",
]
