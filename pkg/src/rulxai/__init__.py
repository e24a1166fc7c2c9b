"""Explainable remaining-useful-life regression for turbofan telemetry."""

__version__ = "0.1.0"
