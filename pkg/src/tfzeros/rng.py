"""Reproducible random streams.

Every sampler takes a :class:`SeededStream`. A stream is identified by a
root seed and a path of integer stream ids, so Monte Carlo replicates can be
drawn in any order (or in parallel) and still produce the same numbers.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

SEED_ENV = "TFZEROS_SEED"


@dataclass(frozen=True)
class SeededStream:
    seed: int
    stream_id: int | tuple[int, ...] = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def key(self) -> tuple[int, ...]:
        if isinstance(self.stream_id, tuple):
            return self.stream_id
        return (int(self.stream_id),)

    def child(self, *ids: int) -> "SeededStream":
        """Sub-stream, independent of its parent and of its siblings."""
        return SeededStream(self.seed, self.key + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        # Philox is counter based: each (seed, key) gets its own key material.
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng: SeededStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


def seed_from_env(default: int | None = None) -> int | None:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return default
    return int(value)
