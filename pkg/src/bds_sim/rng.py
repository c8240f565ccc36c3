"""Deterministic random streams keyed by (master seed, role, replicate)."""
from __future__ import annotations

import zlib

import numpy as np


def _role_key(role: str) -> int:
    return zlib.crc32(role.encode("utf-8"))


def derive_seed(seed: int, label: str) -> int:
    """A master seed for an independent family of replicates, keyed by ``label``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_role_key(label),))
    return int(ss.generate_state(1, np.uint64)[0])


class Streams:
    """The independent generators used by one replicate.

    Each role label ("dominating-birth", "oracle", ...) gets its own
    generator, created on first use and reused afterwards.
    """

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed)
        self.index = int(index)
        self._cache: dict[str, np.random.Generator] = {}

    def __call__(self, role: str) -> np.random.Generator:
        gen = self._cache.get(role)
        if gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(_role_key(role), self.index))
            gen = self._cache[role] = np.random.Generator(np.random.PCG64(ss))
        return gen

    def fresh(self, role: str) -> np.random.Generator:
        """A new generator for ``role``, restarted from its initial state."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(_role_key(role), self.index))
        return np.random.Generator(np.random.PCG64(ss))

    @property
    def provenance(self) -> dict:
        return {"seed": self.seed, "replicate": self.index}


class RandomSource:
    """Master seed from which per-replicate :class:`Streams` are derived."""

    def __init__(self, seed: int):
        if seed is None:
            raise ValueError("a master seed is mandatory")
        self.seed = int(seed)

    def replicate(self, index: int) -> Streams:
        return Streams(self.seed, index)

    def stream(self, role: str, index: int = 0) -> np.random.Generator:
        return Streams(self.seed, index).fresh(role)


def as_streams(rng) -> Streams:
    if isinstance(rng, Streams):
        return rng
    if isinstance(rng, RandomSource):
        return rng.replicate(0)
    if isinstance(rng, (int, np.integer)):
        return Streams(int(rng), 0)
    raise TypeError(f"cannot derive random streams from {type(rng).__name__}")
