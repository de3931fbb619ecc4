"""Counter-based random streams.

Each (replicate key, step, phase) pair owns an independent Philox stream, so
draws never depend on thread count or execution order.  Replicate keys are
derived from the master seed with SeedSequence.spawn.
"""

import numpy as np

# phase ids; one stream per (step, phase)
MOTION = 0
INFECT = 1
RECOVER = 2
THIN_COUNT = 3
THIN_TIME = 4
THIN_ACCEPT = 5
THIN_RECOVER = 6
THIN_RECOVER2 = 7
INIT_POS = 8
INIT_LABEL = 9
OU_PATHS = 10

_INIT_STEP = 2 ** 62  # outside any reachable step index


def master_key(seed):
    """Two-word Philox key from a 64-bit master seed."""
    return np.random.SeedSequence(int(seed)).generate_state(2, dtype=np.uint64)


def replicate_keys(seed, n):
    """Independent per-replicate keys, reproducible for any worker layout."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [c.generate_state(2, dtype=np.uint64) for c in children]


def replicate_seeds(seed, n):
    """Independent per-replicate 64-bit seeds (splittable derivation)."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return np.array([c.generate_state(1, dtype=np.uint64)[0] for c in children],
                    dtype=np.uint64)


def stream(key, step, phase):
    """Generator for one (step, phase) block of a keyed Philox stream."""
    counter = np.array([0, 0, step, phase], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def init_stream(key, phase):
    return stream(key, _INIT_STEP, phase)
