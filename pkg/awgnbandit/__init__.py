"""Simulator for stochastic bandits whose rewards reach the learner over an AWGN channel."""

from .__version__ import __version__

__all__ = ["__version__"]
