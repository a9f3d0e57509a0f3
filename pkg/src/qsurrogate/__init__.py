"""Explicit quantum surrogates for fidelity-kernel classifiers."""

__version__ = "0.1.0"
