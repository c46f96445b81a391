"""Entanglement-network simulator with an SDQN control plane and Q-NUM allocation."""

__version__ = "0.1.0"
