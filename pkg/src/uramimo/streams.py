"""Deterministic random-stream derivation.

Every random draw in an experiment descends from one 64-bit master seed
through ``numpy.random.SeedSequence`` spawn keys.  A stream is addressed by
``(domain, *indices)`` with the domain constants below, e.g. the noise
stream of slot 3 in trial 17 is ``stream(master, DOMAIN_NOISE, 17, 3)``.
Because the key is positional, any stream can be re-created in isolation
without executing the rest of the experiment, and trial streams do not
shift when unrelated scalar parameters (transmit power, thresholds) change.
"""

from __future__ import annotations

import numpy as np

DOMAIN_CODEBOOK = 0
DOMAIN_PARITY = 1
DOMAIN_MESSAGES = 2
DOMAIN_CHANNEL = 3
DOMAIN_NOISE = 4
DOMAIN_DETECTOR = 5
DOMAIN_CHANNEL_SPEC = 6

MASK64 = (1 << 64) - 1


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the stream addressed by ``key`` under ``master_seed``."""
    return np.random.SeedSequence(master_seed & MASK64, spawn_key=tuple(key))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the stream addressed by ``key``."""
    return np.random.default_rng(seed_sequence(master_seed, *key))


def derived_seed(master_seed: int, *key: int) -> int:
    """A stable 64-bit integer seed for the stream addressed by ``key``.

    Used where a component wants a plain integer seed of its own (codebook,
    parity rules) that must still be reproducible from the master seed.
    """
    return int(seed_sequence(master_seed, *key).generate_state(1, np.uint64)[0])


def random_bits(rng: np.random.Generator, nbits: int) -> int:
    """Uniform integer in [0, 2**nbits) from ``rng``, for any bit width."""
    if nbits <= 0:
        return 0
    words = (nbits + 63) // 64
    value = 0
    for w in rng.integers(0, 1 << 64, size=words, dtype=np.uint64):
        value = (value << 64) | int(w)
    return value & ((1 << nbits) - 1)
