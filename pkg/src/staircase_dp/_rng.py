"""Random stream helpers and reproducible seed derivation."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One round of the SplitMix64 finalizer on a 64-bit unsigned integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text):
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed, command="", shard=0):
    """Derive a 64-bit substream seed from ``(seed, command, shard)``.

    ``splitmix64(splitmix64(seed ^ fnv1a64(command)) + shard)``; every step is
    plain 64-bit integer arithmetic so other implementations can replay it.
    """
    if not 0 <= int(seed) <= _MASK64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    x = splitmix64((int(seed) ^ fnv1a64(command)) & _MASK64)
    return splitmix64((x + int(shard)) & _MASK64)


def substream(seed, command="", shard=0):
    return np.random.Generator(np.random.PCG64(derive_seed(seed, command, shard)))


def as_generator(rng):
    """Coerce ``None``, an int seed or a ``Generator`` into a ``Generator``."""
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.RandomState):
        return np.random.default_rng(rng.randint(0, 2**63 - 1))
    if isinstance(rng, (int, np.integer)):
        return substream(int(rng))
    raise TypeError(f"cannot build a random stream from {type(rng).__name__}")


def shard_generators(rng, n_shards):
    """Independent child streams, one per shard, derived from ``rng``."""
    if isinstance(rng, (int, np.integer)):
        return [substream(int(rng), "shard", i) for i in range(n_shards)]
    return as_generator(rng).spawn(n_shards)


def max_threads():
    raw = os.environ.get("STAIRCASE_DP_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        value = os.cpu_count() or 1
    return max(1, value)


def map_shards(func, items):
    """Apply ``func`` to each item, possibly in threads; results keep input order."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
