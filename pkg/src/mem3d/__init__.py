"""Memorization evaluation toolkit for 3D shape generative models."""

__version__ = "0.1.0"
