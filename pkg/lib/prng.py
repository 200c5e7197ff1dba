"""Seeded pseudo-random generators

SplitMix64 drives weight generation and verification trials so the streams
are reproducible from a single integer seed across implementations. A 64-bit
linear congruential generator supplies power-iteration start vectors.
"""

import math

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0


def splitmix64(x: int) -> int:
    """Stateless SplitMix64 hash of x (treated as unsigned 64-bit)"""
    return _mix((int(x) + GOLDEN_GAMMA) & MASK64)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential SplitMix64 stream

    Vectorized draws produce exactly the values repeated ``next_u64`` calls
    would, so a stream can be consumed in any mix of scalar and bulk reads.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def u64(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.full(count, self.state, dtype=np.uint64) + steps * np.uint64(GOLDEN_GAMMA)
        self.state = (self.state + count * GOLDEN_GAMMA) & MASK64
        return _mix_np(z)

    def uniform(self, count: int) -> np.ndarray:
        """``count`` doubles in [0, 1) built from the top 53 bits"""
        return (self.u64(count) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal(self, count: int, sigma: float = 1.0) -> np.ndarray:
        """``count`` Gaussian draws via the Box-Muller transform"""
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        angle = 2.0 * math.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return sigma * z[:count]

    def integer(self, low: int, high: int) -> int:
        """One integer in [low, high)"""
        if high <= low:
            raise ValueError(f"empty range [{low}, {high})")
        return low + self.next_u64() % (high - low)

    def matrix(self, rows: int, cols: int, sigma: float = 1.0) -> np.ndarray:
        return self.normal(rows * cols, sigma).reshape(rows, cols)


class LCG64:
    """64-bit linear congruential generator (Knuth's MMIX constants)"""

    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state * self.MULTIPLIER + self.INCREMENT) & MASK64
        return self.state

    def uniform(self, count: int) -> np.ndarray:
        return np.array([(self.next_u64() >> 11) * _INV_2_53 for _ in range(count)])
