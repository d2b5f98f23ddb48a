"""Seeded random streams.

Every random draw in the package comes from a generator keyed by a master
seed plus a tuple of integer coordinates (replicate, component, ...).  Streams
with different keys are statistically independent, and adding a new component
never shifts the draws of an existing one.
"""

from __future__ import annotations

import secrets

import numpy as np

# component ids; values are part of the reproducibility contract
DGP = 0
MULTIPLIER = 1
GAUSSIAN = 2
GROUPING = 3
NUISANCE = 4
BOOTSTRAP = 5


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for ``seed`` at coordinates ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def entropy_seed() -> int:
    return secrets.randbits(63)


def derived_seed(seed: int, *keys: int) -> int:
    """A 63-bit master seed for a nested procedure run at coordinates ``keys``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
