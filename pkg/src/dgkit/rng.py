"""Deterministic seed derivation.

Every random stream is keyed by the user seed plus a tuple of labels
(task name, trial index, ...), so results never depend on how work is
scheduled across workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *keys) -> int:
    h = hashlib.sha256(repr((int(seed),) + tuple(keys)).encode()).digest()
    return int.from_bytes(h[:8], "little")


def generator(seed: int, *keys) -> np.random.Generator:
    """Philox (counter-based) generator for the stream named by ``keys``."""
    return np.random.Generator(np.random.Philox(derive_seed(seed, *keys)))
