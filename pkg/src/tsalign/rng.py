"""Seed handling.

All randomness flows from 64-bit seeds. ``split_seed`` derives child seeds
from a master seed and an arbitrary tuple of integer/str labels, so work
items can be generated in any order (or in parallel) and still reproduce.
Generators are numpy ``Philox`` (counter-based, platform independent).
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MASK64 = (1 << 64) - 1


def split_seed(master: int, *labels: int | str) -> int:
    """Derive a child seed: blake2b(master, labels...) truncated to 64 bits."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", master & MASK64))
    for label in labels:
        if isinstance(label, str):
            data = label.encode("utf-8")
            h.update(b"s" + struct.pack("<I", len(data)) + data)
        else:
            h.update(b"i" + struct.pack("<Q", int(label) & MASK64))
    return struct.unpack("<Q", h.digest())[0]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


def loguniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    if lo <= 0 or hi <= 0:
        raise ValueError("loguniform bounds must be positive")
    if hi <= lo:
        return float(lo)
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def randint(rng: np.random.Generator, lo: int, hi: int) -> int:
    """Uniform integer in the closed range [lo, hi]."""
    if hi < lo:
        raise ValueError(f"empty integer range [{lo}, {hi}]")
    return int(rng.integers(lo, hi + 1))
