"""Seed handling.

All randomness flows from numpy's PCG64 seeded through ``SeedSequence``
spawn keys, which are stable across platforms and numpy versions.

Stream-splitting rule
---------------------
``stream(seed, purpose, i)`` is the substream for node ``i`` under a named
purpose. Quantities attached to an edge ``(r, t)`` with ``r < t`` are read
from the substream of ``r`` at slot ``t`` of a fixed-length block, so an
edge's draws depend only on ``(seed, purpose, r, t)`` and never on which
other edges happen to exist.
"""

from __future__ import annotations

import hashlib

import numpy as np

PURPOSES = {
    "position": 0,
    "link-kind": 1,
    "noise": 2,
    "bias": 3,
}


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    key = (PURPOSES[purpose], int(index))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def edge_block(seed: int, purpose: str, r: int, size: int, draw) -> np.ndarray:
    """Draw a length-``size`` block from node ``r``'s substream; slot t serves edge (r, t)."""
    return draw(stream(seed, purpose, r), size)


def derive_seed(base: int, *parts) -> int:
    """Stable 63-bit seed from a base seed and labels (cell id, trial index, ...)."""
    text = "/".join([str(int(base))] + [str(p) for p in parts])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1
