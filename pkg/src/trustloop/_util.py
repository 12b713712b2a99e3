"""Shared helpers: named seeded RNG streams and deterministic float text."""

from __future__ import annotations

import zlib

import numpy as np


def rng_for(seed: int, *labels: str | int) -> np.random.Generator:
    """Generator for a named substream of a 64-bit master seed.

    Labels keep independent consumers (init, data sampling, noise, ...) from
    sharing a stream; string labels are hashed with crc32 so the mapping is
    stable across processes and platforms.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        if isinstance(label, str):
            entropy.append(zlib.crc32(label.encode("utf-8")))
        else:
            entropy.append(int(label) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def fmt_float(x: float) -> str:
    """Shortest decimal text that round-trips to the exact float64."""
    return repr(float(x))
