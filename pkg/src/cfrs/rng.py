"""Deterministic random-stream management.

Every stochastic quantity in the package is drawn from a named substream of a
single experiment seed, so results are reproducible and independent of worker
count or evaluation order.
"""

import zlib

import numpy as np


def substream(seed, *tags):
    """Return a ``numpy.random.Generator`` for the substream named by ``tags``.

    Tags may be strings or integers. The same (seed, tags) combination always
    produces the same stream.
    """
    words = []
    for tag in tags:
        if isinstance(tag, (int, np.integer)):
            words.append(int(tag) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(tag).encode("utf-8")))
    entropy = [int(seed) & 0xFFFFFFFF] + words
    return np.random.default_rng(np.random.SeedSequence(entropy))


def complex_normal(rng, shape):
    """Circularly symmetric complex Gaussian samples with unit variance."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
