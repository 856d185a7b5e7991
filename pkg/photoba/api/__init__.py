"""Warstwa API FastAPI."""
