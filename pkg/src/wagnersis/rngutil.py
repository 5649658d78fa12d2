"""Deterministic random-stream derivation.

A single 64-bit master seed expands into independent child streams via a
counter-style hash derivation: the child seed for path ``(a, b, ...)`` is the
first 16 bytes of ``blake2b("wagnersis|<seed>|a|b|...")``.  Concurrent workers
and per-stage samplers each get their own path, so runs are reproducible for a
fixed (seed, worker count) regardless of scheduling order.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def child_seed(seed: int, *path) -> int:
    """128-bit child seed for the given derivation path."""
    tag = "wagnersis|" + "|".join(str(p) for p in (seed,) + tuple(path))
    digest = hashlib.blake2b(tag.encode(), digest_size=16).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, *path) -> random.Random:
    """Python RNG stream for the given path."""
    return random.Random(child_seed(seed, *path))


def derive_np_rng(seed: int, *path) -> np.random.Generator:
    """NumPy Philox stream for the given path (used for bulk array draws)."""
    return np.random.Generator(np.random.Philox(key=child_seed(seed, *path)))
