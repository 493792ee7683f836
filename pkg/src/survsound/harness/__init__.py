"""Experiment orchestration, synthetic data, timing and reports."""
