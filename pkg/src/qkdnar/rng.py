"""Seeded random streams.

Every stochastic choice in the package draws from a PCG64 generator keyed by
(scenario seed, stream id), so link lengths, demand pairs, demand rates,
architecture draws, and tabu picks are independent of each other and
reproducible across platforms.
"""

from __future__ import annotations

import numpy as np

STREAM_LINK_LENGTHS = 1
STREAM_DEMAND_PAIRS = 2
STREAM_DEMAND_RATES = 3
STREAM_ALPHA = 4
STREAM_TABU = 5


def substream(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Independent generator for one documented stream of a seeded run."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, stream, *extra))))
