"""Fuzzy-genetic cloud job scheduling with baselines and a benchmark harness."""

__version__ = "0.1.0"
