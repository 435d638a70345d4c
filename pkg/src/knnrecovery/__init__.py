"""Recovery of a hidden 2k-nearest-neighbour graph from a noisy weighted graph."""

__version__ = "0.1.0"
