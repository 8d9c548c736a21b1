"""Desk-scale discrete-token text-to-speech pipeline."""

__version__ = "0.1.0"
