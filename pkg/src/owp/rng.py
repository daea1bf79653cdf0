"""Reproducible, hierarchically split random streams.

Every stream is a Philox counter-based generator keyed by a base seed and a
tuple of integers (instance, purpose, demand, iteration, ...). The same key
always reproduces the same draws, and distinct keys give independent streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

# purpose tags, second component of every stream key
TRAIN = 0
VALIDATION = 1
BOOTSTRAP = 2
DISCRETE = 3
GENERATE = 4
STUDY = 5


def stable_hash(text):
    """Platform-independent 63-bit hash of a string."""
    digest = hashlib.sha256(str(text).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def make_rng(seed, *stream_id):
    """``numpy.random.Generator`` for ``(seed, stream_id)``.

    String components of ``stream_id`` (typically instance ids) are hashed.
    """
    key = tuple(stable_hash(s) if isinstance(s, str) else int(s) for s in stream_id)
    if any(k < 0 for k in key):
        raise ValueError("stream id components must be nonnegative")
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Coerce ``None``, an int seed or a Generator into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        return make_rng(0 if rng is None else int(rng))
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
