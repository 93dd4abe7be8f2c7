"""Evolutionary quantum-circuit search for unsupervised image similarity."""

__version__ = "0.1.0"
