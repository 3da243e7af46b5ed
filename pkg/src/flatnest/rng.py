"""Seed derivation and random generators.

Every random decision in a study draws from a generator whose seed is a
64-bit hash of the master seed and a tuple of role tags (dataset id,
repetition, learner id, fold index, ...).  Seeds therefore do not depend on
iteration order or on how work is spread over processes.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *tags: object) -> int:
    """Return a 64-bit seed derived from ``seed`` and ``tags``.

    Tags are hashed together with their type names, so ``derive_seed(1, 2)``
    and ``derive_seed(1, "2")`` differ.
    """
    h = hashlib.blake2b(digest_size=8, person=b"flatnest-seed")
    h.update(f"int:{int(seed) & MASK64}".encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(f"{type(tag).__name__}:{tag}".encode())
    return int.from_bytes(h.digest(), "little")


def generator(seed: int) -> np.random.Generator:
    """Counter-based Philox generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & MASK64))
