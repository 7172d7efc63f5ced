"""Retarded-kernel hazard models for dynamic survival prediction."""

__version__ = "0.1.0"
