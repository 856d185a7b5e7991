"""Pakiet testowy."""
