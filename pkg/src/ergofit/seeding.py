"""Counter-based random streams keyed by (seed, name, seed index, replicate).

Each key maps to its own Philox stream, so results never depend on the order
in which replicates or seeds are evaluated.
"""
import zlib

import numpy as np


def stream(seed: int, name: str = "", seed_index: int = 0, replicate: int = 0) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode("utf8")), int(seed_index), int(replicate)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def as_generator(rng=None, seed: int | None = None, name: str = "") -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if seed is None else seed, name)
