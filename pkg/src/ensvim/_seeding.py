"""Deterministic seed derivation.

Every random stream in the package is keyed by a tuple of plain values
(ints, strings, floats) and drawn from a counter-based Philox generator,
so results never depend on call order or on which worker runs a task.
"""
import hashlib

import numpy as np


def derive_seed(*keys) -> int:
    """Hash an arbitrary tuple of keys to an unsigned 64-bit seed."""
    digest = hashlib.blake2b(repr(keys).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(*keys) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(*keys)))
