"""Counter-based random substreams.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by Philox, keyed by ``seed XOR index`` in the low 64 bits and a
lane number in the high 64 bits. Chunk ``index`` of a run always gets the
same stream, whichever worker ends up drawing it.
"""

import numpy as np

from permclt.core.config import settings

MASK64 = (1 << 64) - 1

# Lanes separate independent consumers of the same (seed, index) pair.
LANE_PATHS = 0
LANE_SECONDARY = 1
LANE_DEQUANTIZE = 2
LANE_MATRIX = 3


def substream(seed: int, index: int = 0, lane: int = LANE_PATHS) -> np.random.Generator:
    """
    Build the generator for one substream.

    Args:
        seed: Root seed of the run (any non-negative integer; reduced mod 2**64).
        index: Substream index, usually the chunk number.
        lane: Consumer lane, so that two samplers sharing a chunk never
            share a stream.

    Returns:
        A fresh ``numpy.random.Generator`` over ``Philox``.
    """
    key = ((lane & MASK64) << 64) | ((int(seed) ^ int(index)) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def rng_metadata(seed: int) -> dict:
    """
    Describe the generator for result metadata.

    Args:
        seed: Root seed of the run.

    Returns:
        Dictionary naming the bit generator and the derivation rule.
    """
    return {
        "name": settings.RNG_NAME,
        "seed": int(seed) & MASK64,
        "derivation": "key = lane<<64 | (seed xor chunk_index)",
    }
