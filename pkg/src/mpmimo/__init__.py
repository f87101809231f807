"""Multiport MIMO link analysis: cascaded S-parameter channels, link rates, outage statistics."""

__version__ = "0.1.0"
