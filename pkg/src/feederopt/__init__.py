"""Volt-VAr-aware DER scheduling on unbalanced distribution feeders."""

__version__ = "0.1.0"
