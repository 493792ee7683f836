"""Surveillance sound-event detection with microphone-array beamforming."""

__version__ = "0.1.0"
