"""Deterministic seed derivation for reproducible runs.

A derived seed is the first 64-bit word of numpy's SeedSequence with the
master seed as entropy and the run coordinates as spawn key, e.g.
``(config_id, macroreplication, microreplication, sample_id)``. Any single
run can be re-executed from (master seed, coordinates) alone.
"""
from typing import Sequence, Union

import numpy as np

Coordinate = Union[int, np.integer]


def derive_seed(master_seed: int, coordinates: Sequence[Coordinate]) -> int:
    """Derive a seed for one run coordinate tuple.

    Args:
        master_seed: Non-negative master seed
        coordinates: Non-negative integers identifying the run

    Returns:
        A seed in [0, 2**63)
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(c) for c in coordinates))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def generator(master_seed: int, *coordinates: Coordinate) -> np.random.Generator:
    """Numpy generator seeded from derived coordinates."""
    return np.random.default_rng(derive_seed(master_seed, coordinates))
