"""Exact continued fractions and certified Birkhoff sums of sawtooth observables over circle rotations."""

__version__ = "0.1.0"
