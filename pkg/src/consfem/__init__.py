"""Strictly conservative quadratic-velocity / linear-pressure finite elements."""

__version__ = "0.1.0"
