"""Zeros of Gaussian spectrograms: white-noise models, GAF theory and detection tests."""

__version__ = "0.1.0"
