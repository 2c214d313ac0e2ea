"""Per-replicate random streams.

Replicate ``r`` of a run with master seed ``s`` draws from
``Generator(PCG64(SeedSequence(entropy=s, spawn_key=(r, *extra))))``.
SeedSequence hashes (entropy, spawn_key) into the PCG64 state, so streams
are independent of scheduling and of how many workers run them.
"""

from __future__ import annotations

import numpy as np

RNG_SCHEME = "numpy.PCG64/SeedSequence(entropy=master_seed, spawn_key=(replicate, ...))"


def replicate_rng(master_seed: int, replicate: int, *extra: int) -> np.random.Generator:
    if master_seed < 0 or master_seed >= 2**64:
        raise ValueError(f"master seed must be an unsigned 64-bit integer, got {master_seed}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(replicate, *extra))
    return np.random.Generator(np.random.PCG64(seq))


def rng_scheme() -> str:
    return f"{RNG_SCHEME}; numpy {np.__version__}"
