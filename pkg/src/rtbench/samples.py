"""Synthetic sample store standing in for a preloaded input-sample library.

Sample content is a pure function of (seed, index, sample_bytes): each sample
tiles one seeded 64-bit word across its buffer. Stores are therefore cheap to
materialize at realistic sizes, distinct per index, and any sample's bytes can
be recomputed independently by tests and by remote peers.
"""

from __future__ import annotations

import struct

from .prng import value_at


class SampleStore:
    def __init__(self, store_size: int, sample_bytes: int, seed: int) -> None:
        if store_size < 1:
            raise ValueError("store_size must be >= 1")
        if sample_bytes < 1:
            raise ValueError("sample_bytes must be >= 1")
        self.store_size = store_size
        self.sample_bytes = sample_bytes
        self.seed = seed

    def __len__(self) -> int:
        return self.store_size

    def sample(self, index: int) -> bytes:
        """Bytes of the sample at index; deterministic for a given store."""
        if not 0 <= index < self.store_size:
            raise IndexError(f"sample index {index} outside store of size {self.store_size}")
        word = struct.pack("<Q", value_at(self.seed, index))
        repeats = -(-self.sample_bytes // 8)
        return (word * repeats)[: self.sample_bytes]
