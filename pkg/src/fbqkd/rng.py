"""Deterministic named RNG substreams.

All randomness in a scenario flows from one root seed. Each consumer asks
for a substream by name (optionally with extra integer components such as a
segment index), so results do not depend on the order in which modules draw
numbers or on how a run is split into parallel segments.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, *names: str | int) -> np.random.Generator:
    """Return a Generator for the substream identified by ``names``.

    String components are hashed to stable 64-bit keys; integer components
    (segment indices, trial numbers) are used as-is.
    """
    key = tuple(_name_key(n) if isinstance(n, str) else int(n) for n in names)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(root_seed), spawn_key=key))
