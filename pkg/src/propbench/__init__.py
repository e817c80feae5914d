"""Depth-controlled propositional reasoning benchmarks: generation, oracle
verification, surface realization, and model evaluation."""

__version__ = "0.1.0"
