"""Counter-based 64-bit mixing used for every random stream in the package.

All randomness derives from SplitMix64's finalizer applied to
``key + counter * GOLDEN``.  Because a coin depends only on its key and
counter, results do not depend on evaluation order or threading.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (result in [0, 2**64))."""
    z &= MASK64
    z ^= z >> 30
    z = (z * _M1) & MASK64
    z ^= z >> 27
    z = (z * _M2) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """Seed for stream ``index`` under ``base_seed``.

    ``mix64(base_seed + (index + 1) * GOLDEN)``; used for per-repetition seeds.
    """
    return mix64(base_seed + (index + 1) * GOLDEN)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array (wrapping arithmetic)."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))
