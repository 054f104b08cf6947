"""Delayed-choice quantum eraser simulator and analysis harness."""

__version__ = "0.1.0"
