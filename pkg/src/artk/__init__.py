"""Toolkit for articulated-object geometry, synthetic data, baselines and evaluation."""

__version__ = "0.1.0"
