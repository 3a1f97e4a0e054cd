"""Delay-discounting scoring, like embeddings and DDR prediction."""

__version__ = "0.1.0"
