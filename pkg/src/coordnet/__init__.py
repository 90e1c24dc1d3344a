"""Detect coordinated influence-operation activity from coordination-network statistics."""

__version__ = "0.1.0"
