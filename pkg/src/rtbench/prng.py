"""Deterministic 64-bit pseudo-random stream used for query scheduling.

The generator is splitmix64, fixed bit-exactly so that schedules and
synthetic sample content are identical across runs, platforms, and
reimplementations in other languages: the state advances by the 64-bit
golden gamma 0x9E3779B97F4A7C15 and the output passes through the
xor-shift/multiply finalizer with constants 0xBF58476D1CE4E5B9 (shift 30),
0x94D049BB133111EB (shift 27), and a final shift of 31.

The stream for seed 0 starts with 0xE220A8397B1DCDAF.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(state: int) -> int:
    """Apply the output finalizer to an already-advanced state word."""
    z = state & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def value_at(seed: int, index: int) -> int:
    """Random-access form: the index-th output of the stream seeded with seed.

    Equivalent to constructing SplitMix64(seed) and calling next_u64()
    index + 1 times, but O(1).
    """
    if index < 0:
        raise ValueError("index must be non-negative")
    return mix64((seed + (index + 1) * _GAMMA) & MASK64)


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        return mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Next draw reduced modulo bound (schedule index convention)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def next_unit(self) -> float:
        """Next draw mapped to [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53
