"""Verification toolkit for auxiliary Stokes fields in a narrow particle-wall gap."""

__version__ = "0.1.0"
