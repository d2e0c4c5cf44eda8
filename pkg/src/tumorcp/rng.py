"""Deterministic, counter-based random streams for parallel augmentation.

Every stochastic draw in the engine comes from an :class:`RngStream`
identified by ``(base_seed, stream_id)``. Streams are backed by the Philox
counter-based bit generator, so the draw sequence depends only on the two
identifiers, never on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_stream_id(*parts: int) -> int:
    """Mix integer identifiers (case ordinal, epoch, sample index, ...) into
    a 64-bit stream id. Stable across platforms and Python versions."""
    h = 0x8C2F9D1B6AE35F07
    for p in parts:
        h = _splitmix64(h ^ (int(p) & _MASK64))
    return h


class RngStream:
    """One independent draw sequence, fully determined by its identifiers.

    ``counter`` records how many draw calls were made, for provenance only;
    it does not participate in seeding.
    """

    def __init__(self, base_seed: int, stream_id: int = 0):
        self.base_seed = int(base_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.base_seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self.counter = 0

    def random(self) -> float:
        """Uniform draw in [0, 1)."""
        self.counter += 1
        return float(self._gen.random())

    def uniform(self, lo: float, hi: float, size=None):
        self.counter += 1
        out = self._gen.uniform(lo, hi, size)
        return float(out) if size is None else out

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        self.counter += 1
        return int(self._gen.integers(n))

    def substream(self, *parts: int) -> "RngStream":
        """A child stream that never collides with the parent's draws."""
        return RngStream(self.base_seed, derive_stream_id(self.stream_id, *parts))

    def __repr__(self) -> str:
        return (
            f"RngStream(base_seed={self.base_seed:#x}, "
            f"stream_id={self.stream_id:#x}, counter={self.counter})"
        )
