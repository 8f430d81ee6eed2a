"""Deterministic random number generation for the example gallery.

A 64-bit splitmix-style generator: every state update adds the golden-ratio
increment and the output is produced by two multiply-xorshift mixing rounds.
The stream for a given seed is identical across platforms and processes,
which keeps example runs reproducible byte-for-byte.
"""
from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Splittable 64-bit generator with uniform and normal helpers."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One double in [0, 1) built from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_open(self) -> float:
        """One double in (0, 1); safe to pass to log."""
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53

    def normal(self) -> float:
        """One standard normal draw (Box-Muller, cosine branch)."""
        u1 = self.uniform_open()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, so no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        bound = _MASK + 1 - ((_MASK + 1) % n)
        while True:
            z = self.next_u64()
            if z < bound:
                return z % n

    def uniforms(self, *shape: int) -> np.ndarray:
        out = np.empty(int(np.prod(shape)) if shape else 1)
        for i in range(out.size):
            out[i] = self.uniform()
        return out.reshape(shape) if shape else out

    def normals(self, *shape: int) -> np.ndarray:
        out = np.empty(int(np.prod(shape)) if shape else 1)
        for i in range(out.size):
            out[i] = self.normal()
        return out.reshape(shape) if shape else out

    def spawn(self) -> "SplitMix64":
        """Independent child stream seeded from this one."""
        return SplitMix64(self.next_u64())
