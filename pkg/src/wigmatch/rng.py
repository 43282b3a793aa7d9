"""Seeded RNG streams.

All randomness in a run is derived from one 64-bit master seed via
``numpy.random.SeedSequence([master, STREAM_ID])``.  The four top-level
streams keep instance generation, noise re-injection, sign-matrix sampling
and corruption independent, so a corrupted run can replay the exact noise
and sign draws of its clean twin.
"""

from __future__ import annotations

import numpy as np

STREAM_INSTANCE = 0
STREAM_NOISE = 1
STREAM_BETA = 2
STREAM_CORRUPTION = 3

_STREAM_NAMES = {
    "instance": STREAM_INSTANCE,
    "noise": STREAM_NOISE,
    "beta": STREAM_BETA,
    "corruption": STREAM_CORRUPTION,
}


def stream_seed(master_seed: int, stream: int | str) -> int:
    """Derive the 64-bit seed of one named stream from the master seed."""
    if isinstance(stream, str):
        stream = _STREAM_NAMES[stream]
    ss = np.random.SeedSequence([int(master_seed), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_streams(master_seed: int) -> dict[str, int]:
    """All four stream seeds for a run, keyed by stream name."""
    return {name: stream_seed(master_seed, sid) for name, sid in _STREAM_NAMES.items()}


def generator(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


def child(seed: int, index: int) -> int:
    """Deterministic sub-seed, for splitting one stream further."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5EED, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
