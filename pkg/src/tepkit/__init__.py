"""Robust transmission expansion planning under dispatch scenarios."""

__version__ = "0.1.0"
