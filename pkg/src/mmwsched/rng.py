"""Named random sub-streams derived from one scenario seed.

Every consumer of randomness (traffic per UE, shadowing per UE, HARQ coin
flips, obstacle placement, ...) draws from its own stream, so changing the
scheduler never perturbs the channel or the offered traffic.
"""

import zlib

import numpy as np


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    key = (zlib.crc32(name.encode()),) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))
