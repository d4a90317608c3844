"""Deterministic random stream derivation."""

import numpy as np

STREAM_SCENE = 0
STREAM_RADAR = 1
STREAM_DECALIBRATION = 2


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and a key path.

    The split function is ``SeedSequence(seed, spawn_key=key)``: the same
    ``(seed, key)`` always yields the same stream and distinct keys yield
    statistically independent streams, whatever order they are requested
    in. Frame ``i`` of split ``s`` uses the key ``(s, i, stream)``.

    Args:
        seed: Master seed of the run
        *key: Non-negative integers identifying the stream

    Returns
    -------
        A PCG64 generator seeded for this stream
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.default_rng(sequence)

# Keys of length two never collide with the three-element frame keys.
STREAM_TRAINING = 5
STREAM_MODEL_INIT = 6
STREAM_EVALUATION = 8
