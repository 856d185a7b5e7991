"""Pakiet tras API."""
