"""Millimetre-wave multipath parameter extraction and TCSL channel generation."""

__version__ = "0.1.0"
