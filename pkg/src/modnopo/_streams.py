"""Counter-based per-trajectory RNG streams.

Each trajectory owns a Philox generator keyed by (seed XOR module salt,
trajectory index), so the stream depends only on the seed and the
trajectory's global index: batching, worker count, and scheduling cannot
change what any trajectory draws.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Distinct salts keep different consumers of the same user seed decorrelated.
SALT_PHASE_SPACE = 0
SALT_STATE_DIFFUSION = 0x9E3779B97F4A7C15


def trajectory_stream(seed: int, index: int, salt: int = 0) -> np.random.Generator:
    """Generator for one trajectory, independent of all batching choices."""
    key = np.array([(seed ^ salt) & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
