"""Prototype-bank multimodal sentiment regression."""

__version__ = "0.1.0"
