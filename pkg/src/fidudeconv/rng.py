"""Seeded random streams.

A chain consumes one ``numpy.random.Generator`` (PCG64) built from a 64-bit
master seed.  Replicate ``k`` of a study uses the stream obtained by spawning
child ``k`` of the master ``SeedSequence``, i.e. ``SeedSequence(seed,
spawn_key=(k,))``; SeedSequence hashes the key with the entropy, so streams
for different replicates are statistically independent and do not depend on
execution order.
"""

import numpy as np

__all__ = ["make_rng", "replicate_rng", "replicate_seed"]

_MASK64 = (1 << 64) - 1


def _check_seed(seed):
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return seed & _MASK64


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_check_seed(seed))))


def replicate_seed(seed, index):
    """64-bit seed for replicate ``index`` derived from the master ``seed``."""
    ss = np.random.SeedSequence(_check_seed(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replicate_rng(seed, index):
    return make_rng(replicate_seed(seed, index))
