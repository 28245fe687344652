"""Truncated Fock-space simulation of cat-qudit cluster states and logical MBQC."""

__version__ = "0.1.0"
