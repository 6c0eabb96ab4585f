"""Deterministic random streams.

Seed schema: every stochastic routine takes a single integer run seed and
derives independent substreams with ``stream(seed, *key)``, where the key is
a tuple of small integers (chunk index, purpose index, ...).  Streams are
PCG64 generators split through ``numpy.random.SeedSequence`` spawn keys, so
two distinct keys never overlap and results are reproducible bit-exact for a
fixed (seed, key) regardless of how many other streams are drawn.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for substream ``key`` of run ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
