"""Deterministic tabletop pick-and-place benchmark with an inference-time
observation-rewriting middleware and its evaluation harness."""

__version__ = "0.1.0"
