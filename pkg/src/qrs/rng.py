"""Seedable, splittable random streams.

Every stochastic routine in qrs takes a ``numpy.random.Generator``.  Streams
are derived from a root seed with :class:`numpy.random.SeedSequence` spawn
keys, so the generator for ``(seed, "trial", 7)`` is the same no matter which
worker builds it or in which order.

Stream-derivation rule: ``stream(seed, *path)`` hashes the string labels of
``path`` to 32-bit words and appends the integer labels verbatim, giving the
spawn key of a ``SeedSequence(seed)``.  The bit generator is PCG64.
"""

from __future__ import annotations

import zlib

import numpy as np

MASK64 = (1 << 64) - 1


def _key(path: tuple) -> tuple[int, ...]:
    out = []
    for part in path:
        if isinstance(part, str):
            out.append(zlib.crc32(part.encode("utf-8")))
        else:
            idx = int(part)
            if idx < 0:
                raise ValueError("stream indices must be non-negative")
            out.append(idx)
    return tuple(out)


def seed_sequence(seed: int, *path) -> np.random.SeedSequence:
    if not 0 <= int(seed) <= MASK64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.SeedSequence(int(seed), spawn_key=_key(path))


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for the substream named by ``path``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *path)))


def streams(seed: int, n: int, *path) -> list[np.random.Generator]:
    """Generators for substreams ``path + (0,)`` ... ``path + (n-1,)``."""
    return [stream(seed, *path, i) for i in range(n)]
