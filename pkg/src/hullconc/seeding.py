"""Counter-based random streams keyed by (master seed, indices)."""

from __future__ import annotations

import numpy as np


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(master, *keys)``.

    Trials seeded this way do not depend on execution order, so serial
    and parallel runs draw identical numbers.
    """
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))
