"""Scattering toolkit for a five-state bipartite Landau-Zener model and its SSH-chain realisation."""

__version__ = "0.1.0"
