"""Deterministic random substreams.

Every replicate ``r`` owns a handful of independent substreams indexed by
``s`` (one per purpose: influence coins, noise, pairing, ...).  The seed of
substream ``(r, s)`` is ``mix(mix(master) ^ (r << 32 | s))`` where ``mix`` is
the SplitMix64 finalizer.  ``mix`` is a bijection on 64-bit words, so distinct
``(r, s)`` pairs with ``r, s < 2**32`` always get distinct seeds.  The seed is
fed to numpy's PCG64, whose output is platform independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1

# substream purposes
COIN = 0
NOISE = 1
PAIRING = 2
AUX = 3


def splitmix64(x: int) -> int:
    """SplitMix64 output function applied to a single 64-bit word."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def substream_seed(master_seed: int, replicate: int, stream: int) -> int:
    if not 0 <= replicate < 1 << 32:
        raise ValueError(f"replicate id out of range: {replicate}")
    if not 0 <= stream < 1 << 32:
        raise ValueError(f"stream id out of range: {stream}")
    word = (replicate << 32) | stream
    return splitmix64(splitmix64(master_seed & MASK64) ^ word)


@dataclass(frozen=True)
class SeedPolicy:
    """Master seed plus the fixed rule deriving per-replicate substreams."""

    master_seed: int = 0

    def seed(self, replicate: int, stream: int) -> int:
        return substream_seed(self.master_seed, replicate, stream)

    def generator(self, replicate: int, stream: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed(replicate, stream)))

    def stream(self, replicate: int) -> RngStream:
        return RngStream(
            coin=self.generator(replicate, COIN),
            noise=self.generator(replicate, NOISE),
            pairing=self.generator(replicate, PAIRING),
        )


@dataclass
class RngStream:
    """The generators owned by one replicate.

    Never share an instance between workers.
    """

    coin: np.random.Generator
    noise: np.random.Generator
    pairing: np.random.Generator
