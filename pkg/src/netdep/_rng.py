import numpy as np


def stream(seed, *key):
    """Independent generator for ``seed`` and an integer spawn key.

    Streams with different keys are statistically independent, and a given
    (seed, key) pair always yields the same sequence, so work split across
    workers reproduces bit-for-bit regardless of scheduling.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def fresh_seed():
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint32)[0])
