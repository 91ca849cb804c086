"""Keyed, reproducible random streams.

Streams are identified by a (seed, stream) pair of 64-bit integers and are
backed by counter-based Philox generators, so distinct stream ids give
statistically independent substreams of the same seed. Draws depend only on
the key, never on scheduling, which keeps parallel consumers reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream-id) key addressing one deterministic substream."""

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < _U64 and 0 <= int(self.stream) < _U64):
            raise InvalidParameterError("seed and stream must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this substream."""
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, offset: int) -> "RngStream":
        """Derived stream with a shifted stream id (disjoint from the parent)."""
        return RngStream(self.seed, (self.stream + offset) % _U64)
