"""Reproducible random streams: xoshiro256** seeded through SplitMix64.

The stream is fully specified so other implementations can reproduce it
bit for bit:

* Seeding: the 64-bit seed initialises a SplitMix64 counter ``x``; each of
  the four state words is the next SplitMix64 output
  (``x += 0x9E3779B97F4A7C15``; ``z = x``;
  ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``;
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``; ``z ^= z >> 31``, all mod 2**64).
* Output: xoshiro256** (``rotl(s1 * 5, 7) * 9``, then the standard
  256-bit state update).
* Uniform doubles: ``(u64 >> 11) * 2**-53``, in [0, 1).
"""
from __future__ import annotations

import numpy as np

from mddra import _kernels

_MASK64 = (1 << 64) - 1


def splitmix64_state(seed: int) -> np.ndarray:
    x = int(seed) & _MASK64
    words = []
    for _ in range(4):
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        words.append(z ^ (z >> 31))
    return np.array(words, dtype=np.uint64)


class Xoshiro256:
    """xoshiro256** generator owning its 256-bit state."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.state = splitmix64_state(seed)

    def next_u64(self, n: int) -> np.ndarray:
        out, self.state = _kernels.xoshiro256ss(self.state, int(n))
        return out

    def uniforms(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
