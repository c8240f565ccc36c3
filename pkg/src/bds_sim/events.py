"""Event algebra for Birth-Death-Swap populations.

A population with ``p`` subgroups is a vector of ``p`` nonnegative counts.
Events are swaps ``(i, j)`` moving one individual from ``i`` to ``j``,
births into ``j`` and deaths out of ``i``.  Births and deaths are swaps
from/to a fictitious subgroup whose unit vector is zero.

Subgroup indices are 0-based throughout the code.  Event types are indexed
densely in a fixed order: swaps row-major, then births, then deaths, so a
counting vector is a flat integer array of length ``p * (p + 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .errors import EnumerationCapExceeded

SWAP = "swap"
BIRTH = "birth"
DEATH = "death"

#: Default bound on the size of an enumerated level set.
DEFAULT_LEVEL_SET_CAP = 200_000


@dataclass(frozen=True)
class EventType:
    """One event type.  ``src``/``dst`` are ``None`` for the fictitious subgroup."""

    kind: str
    src: int | None = None
    dst: int | None = None

    def __post_init__(self):
        if self.kind == SWAP:
            if self.src is None or self.dst is None or self.src == self.dst:
                raise ValueError(f"swap needs two distinct subgroups, got {self}")
        elif self.kind == BIRTH:
            if self.dst is None or self.src is not None:
                raise ValueError(f"birth needs a destination only, got {self}")
        elif self.kind == DEATH:
            if self.src is None or self.dst is not None:
                raise ValueError(f"death needs a source only, got {self}")
        else:
            raise ValueError(f"unknown event kind {self.kind!r}")

    @classmethod
    def swap(cls, i: int, j: int) -> "EventType":
        return cls(SWAP, i, j)

    @classmethod
    def birth(cls, j: int) -> "EventType":
        return cls(BIRTH, None, j)

    @classmethod
    def death(cls, i: int) -> "EventType":
        return cls(DEATH, i, None)

    @property
    def is_demographic(self) -> bool:
        return self.kind != SWAP

    def label(self) -> str:
        src = "inf" if self.src is None else str(self.src + 1)
        dst = "inf" if self.dst is None else str(self.dst + 1)
        return f"({src},{dst})"


def effect_vector(event: EventType, p: int) -> np.ndarray:
    """Jump of the population caused by ``event``: ``e_dst - e_src``."""
    for idx in (event.src, event.dst):
        if idx is not None and not 0 <= idx < p:
            raise IndexError(f"subgroup index {idx} out of range for p={p}")
    phi = np.zeros(p, dtype=np.int64)
    if event.dst is not None:
        phi[event.dst] += 1
    if event.src is not None:
        phi[event.src] -= 1
    return phi


class EventSpace:
    """Dense indexing of the ``p * (p + 1)`` event types of a ``p``-group population."""

    def __init__(self, p: int):
        if p < 1:
            raise ValueError("p must be at least 1")
        self.p = p
        swaps = [EventType.swap(i, j) for i in range(p) for j in range(p) if i != j]
        births = [EventType.birth(j) for j in range(p)]
        deaths = [EventType.death(i) for i in range(p)]
        self.events: tuple[EventType, ...] = tuple(swaps + births + deaths)
        self.n_swaps = len(swaps)
        self.index = {e: k for k, e in enumerate(self.events)}
        self.effects = np.array([effect_vector(e, p) for e in self.events], dtype=np.int64)
        self.effects.setflags(write=False)
        self.swap_slice = slice(0, self.n_swaps)
        self.birth_slice = slice(self.n_swaps, self.n_swaps + p)
        self.death_slice = slice(self.n_swaps + p, self.n_swaps + 2 * p)
        self.demographic_slice = slice(self.n_swaps, self.n_swaps + 2 * p)
        # plain lists for the hot loops
        self.kinds = [e.kind for e in self.events]
        self.sources = [e.src for e in self.events]
        self.targets = [e.dst for e in self.events]
        self.deltas = [int(phi.sum()) for phi in self.effects]

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, k: int) -> EventType:
        return self.events[k]

    def swap_index(self, i: int, j: int) -> int:
        return self.index[EventType.swap(i, j)]

    def birth_index(self, j: int) -> int:
        return self.n_swaps + j

    def death_index(self, i: int) -> int:
        return self.n_swaps + self.p + i

    def is_swap(self, k: int) -> bool:
        return k < self.n_swaps

    def counting_vector(self, events: Sequence[int]) -> np.ndarray:
        """Counting vector of a sequence of event indices."""
        return np.bincount(np.asarray(events, dtype=np.int64), minlength=len(self.events))


@lru_cache(maxsize=None)
def event_space(p: int) -> EventSpace:
    return EventSpace(p)


def apply_counts(z0: Sequence[int], nu: Sequence[int]) -> np.ndarray:
    """Return ``z0 + phi (.) nu``.

    The result may have negative entries for arbitrary ``nu``; callers check
    nonnegativity themselves (see :func:`is_population`).
    """
    z0 = np.asarray(z0, dtype=np.int64)
    space = event_space(len(z0))
    nu = np.asarray(nu, dtype=np.int64)
    if nu.shape != (len(space),):
        raise ValueError(f"counting vector must have length {len(space)}, got {nu.shape}")
    return z0 + nu @ space.effects


def is_population(z) -> bool:
    return bool(np.all(np.asarray(z) >= 0))


def aggregate(x) -> int:
    """Sum of the coordinates (population size for a state)."""
    return int(np.sum(x))


@lru_cache(maxsize=256)
def _level_set(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    if p == 1:
        return ((n,),)
    out = []
    for first in range(n + 1):
        for rest in _level_set(n - first, p - 1):
            out.append((first,) + rest)
    return tuple(out)


def level_set_size(n: int, p: int) -> int:
    return comb(n + p - 1, p - 1)


def enumerate_level_set(n: int, p: int, cap: int = DEFAULT_LEVEL_SET_CAP) -> tuple[tuple[int, ...], ...]:
    """All states of size ``n`` with ``p`` subgroups, in lexicographic order.

    The order is the indexing contract shared by generators and kernels.
    """
    if n < 0 or p < 1:
        raise ValueError(f"need n >= 0 and p >= 1, got n={n}, p={p}")
    size = level_set_size(n, p)
    if size > cap:
        raise EnumerationCapExceeded(f"level set U_{n} for p={p} has {size} states > cap {cap}")
    return _level_set(n, p)


def level_set_index(n: int, p: int) -> dict[tuple[int, ...], int]:
    return _level_index(n, p)


@lru_cache(maxsize=256)
def _level_index(n: int, p: int) -> dict[tuple[int, ...], int]:
    return {z: k for k, z in enumerate(enumerate_level_set(n, p))}
