"""Trajectory extraction from raw AIS records with quantile-calibrated split points."""

__version__ = "0.1.0"
