"""Deterministic random streams derived from a master seed.

Every randomized routine takes a ``numpy.random.Generator``.  Ensembles derive
one generator per replica from ``(master_seed, stream name, replica index)``
so results do not depend on how replicas are scheduled across workers.
"""
import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def stream_key(name):
    return zlib.crc32(name.encode("utf-8"))


def replica_rng(master_seed, index, stream="default"):
    seq = np.random.SeedSequence(int(master_seed) & MASK64, spawn_key=(stream_key(stream), int(index)))
    return np.random.Generator(np.random.PCG64(seq))


def named_rng(master_seed, stream):
    seq = np.random.SeedSequence(int(master_seed) & MASK64, spawn_key=(stream_key(stream),))
    return np.random.Generator(np.random.PCG64(seq))


def as_rng(rng):
    """Accept a Generator, an integer seed, or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
