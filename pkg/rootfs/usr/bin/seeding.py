"""Splittable seed derivation.

Every stochastic operation takes a 64-bit seed. Child seeds are derived from a
master seed and a path label ("moments/mc/trial:17") by hashing, so results do not
depend on the order or the worker in which the children run.
"""
import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, label: str) -> int:
    """Return the 64-bit child seed of ``master`` for ``label``."""
    digest = hashlib.blake2b(
        f"{int(master) & SEED_MASK}/{label}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def make_rng(seed: int) -> np.random.Generator:
    """Create the numpy generator used throughout for a given 64-bit seed."""
    return np.random.default_rng(int(seed) & SEED_MASK)
