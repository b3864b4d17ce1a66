"""Leakage-aware evaluation toolkit for vibration-based bearing fault diagnosis."""

__version__ = "0.1.0"
