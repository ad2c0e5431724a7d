"""
Seed splitting.

A single master seed expands into named streams. Every random draw in the
library comes from ``make_rng(master, STREAM, *keys)``, which keys a Philox
counter-based generator with ``SeedSequence([master, STREAM, *keys])``.
Chunk / user / subcarrier indices go into ``keys`` so results never depend
on how work is split across workers.
"""

import numpy as np

CHANNEL_STREAM = 1
SIMULATION_STREAM = 2


def seed_sequence(master: int, stream: int, *keys: int) -> np.random.SeedSequence:
    if master < 0:
        raise ValueError("master seed must be nonnegative")
    return np.random.SeedSequence([int(master), int(stream), *[int(k) for k in keys]])


def make_rng(master: int, stream: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(master, stream, *keys)))
