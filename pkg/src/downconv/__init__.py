"""Multimode circuit-QED simulator for photon down-conversion in a fluxonium-terminated line."""

__version__ = "0.1.0"
