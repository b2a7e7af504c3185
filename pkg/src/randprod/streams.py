"""Counter-addressable random streams.

Stream ``(master_seed, index)`` is a Philox generator keyed from a
``SeedSequence`` with ``spawn_key=(index,)``.  Any replicate can be
regenerated on its own, so results do not depend on how work is split
across threads.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def substream(master_seed: int, index: int, *extra: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(int(index), *map(int, extra)))
    return np.random.Generator(np.random.Philox(ss))


def replicate_seed(master_seed: int, index: int) -> int:
    """A 64-bit fingerprint of the stream used by replicate ``index``."""
    ss = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])
