"""Synthesis of statistical and reference models for means under nonpositivity."""

__version__ = "0.1.0"
