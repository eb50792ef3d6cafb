"""Exoskeleton feedforward control, coupled gait simulation and interaction portraits."""

__version__ = "0.1.0"
