"""Simulation of donor flip-flop qubit gates under 1/f charge noise."""

__version__ = "0.1.0"
