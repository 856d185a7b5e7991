"""Fotometryczne dopasowanie wiązki: silnik, CLI i API HTTP."""

__version__ = "1.0.0"
