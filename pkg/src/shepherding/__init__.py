"""Learned and heuristic shepherding controllers with a seeded herder-target
simulator, training algorithms, and a benchmarking harness."""

__version__ = "0.1.0"

from .sim import SimParams, WorldState  # noqa: F401
