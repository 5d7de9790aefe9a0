"""Recursive-dynamic CGE engine for deforestation-linked export restrictions."""

__version__ = "0.1.0"
