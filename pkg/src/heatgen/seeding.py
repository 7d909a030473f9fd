"""Seed derivation.

Every random stream in the engine is derived from one global seed plus a
tuple of stable keys (building id, purpose, repetition, dwelling).  Keys are
hashed with BLAKE2b so results never depend on insertion order or on
Python's per-process string hash randomization.
"""
from __future__ import annotations

import hashlib
import secrets

import numpy as np

OCCUPANCY = "occupancy"
SETPOINTS = "setpoints"
SELECTION = "selection"


def stable_hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def mix(seed: int, *keys) -> int:
    """Derive a child 64-bit seed from ``seed`` and arbitrary keys."""
    words = [seed & 0xFFFFFFFF, seed >> 32]
    for key in keys:
        if isinstance(key, str):
            h = stable_hash64(key)
        else:
            h = int(key) & 0xFFFFFFFFFFFFFFFF
        words.extend((h & 0xFFFFFFFF, h >> 32))
    state = np.random.SeedSequence(words).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def building_seed(global_seed: int, building_id: str) -> int:
    return mix(global_seed, building_id)


def occupancy_seed(bseed: int, repetition: int = 0, dwelling: int = 0) -> int:
    """Occupancy stream seed; repetition 0 is the base run."""
    return mix(bseed, OCCUPANCY, repetition, dwelling)


def setpoint_seed(bseed: int) -> int:
    return mix(bseed, SETPOINTS)


def selection_seed(global_seed: int, repetition: int) -> int:
    return mix(global_seed, SELECTION, repetition)


def draw_seed() -> int:
    return secrets.randbits(64)
