"""Counter-based splitmix64 uniforms.

The i-th draw for a 64-bit ``seed`` is the splitmix64 finaliser applied to
``seed + (i + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``; the top 53 bits of the
result, times 2**-53, give a uniform in [0, 1).  Any implementation using the
same constants reproduces the stream bit-for-bit.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1


def splitmix64(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Raw 64-bit outputs for counters ``offset .. offset + count - 1``."""
    base = np.uint64(int(seed) & MASK64)
    i = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = base + i * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, count: int, offset: int = 0) -> np.ndarray:
    z = splitmix64(seed, count, offset)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
