"""Outer automorphisms of free groups: displacement, train tracks, decisions."""

__version__ = "0.1.0"
