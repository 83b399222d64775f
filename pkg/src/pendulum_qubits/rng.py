"""Seeded random streams.

Every stream is a numpy ``PCG64`` generator keyed by a ``SeedSequence`` built
from the user seed plus integer stream keys, so shot ``i`` of a run seeded
with ``s`` always sees the same draws regardless of thread count or of how
many other shots ran.  Measurements consume exactly one ``random()`` draw.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    """Generator owned by one shot of a seeded run."""
    return stream(seed, shot)
