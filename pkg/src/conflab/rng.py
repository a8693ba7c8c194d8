"""Seeded, splittable random streams.

Every stochastic routine in this package takes an RngStream instead of a bare
seed.  A stream is identified by the pair (master_seed, stream_id); the pair is
used verbatim as the 128-bit key of a Philox4x64 counter-based generator, so
distinct pairs give statistically independent sequences and equal pairs give
bit-identical ones regardless of what other streams were consumed in between.

Experiment drivers derive one substream per work chunk (substream ids are mixed
with a splitmix64 round to keep derived ids spread over the full 64-bit range),
which makes Monte Carlo results independent of worker count and scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GENERATOR_ID = "philox4x64"

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Standard splitmix64 finalizer; one round is enough to decorrelate ids.
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Handle for one reproducible random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "master_seed", self.master_seed & _MASK64)
        object.__setattr__(self, "stream_id", self.stream_id & _MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream."""
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def split(self, index: int) -> "RngStream":
        """Derive the index-th child stream; deterministic in (self, index)."""
        child = _splitmix64(self.stream_id ^ _splitmix64(index))
        return RngStream(self.master_seed, child)
