"""Intrinsic reference basis decomposition and IRB-selective Lindblad dynamics."""

__version__ = "0.1.0"
