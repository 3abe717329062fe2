"""Functional and performance simulator for silicon-photonic transformer and GNN accelerators."""

__version__ = "0.1.0"
