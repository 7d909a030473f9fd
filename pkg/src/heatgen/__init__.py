"""Synthetic building-level residential heat demand profiles.

The pipeline classifies buildings into archetypes, calibrates a one-node
thermal model per building from its annual demand, drives it with seeded
Markov-chain occupancy, and aggregates the hourly results.
"""

__version__ = "0.1.0"
