"""coded-gossip: simulate and verify network-coded gossip with correlated data."""

__version__ = "0.1.0"
