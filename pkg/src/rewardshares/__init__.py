"""Agents trading shares of each other's rewards in social dilemmas."""

__version__ = "0.1.0"
