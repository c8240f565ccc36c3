"""Two-timescale BDS populations and occupation kernels between demographic events.

Swap rates (and their dominators) are multiplied by ``1/eps``; demographic
rates are unchanged.  Since the demographic part of a skeleton is drawn from
its own streams, a fixed seed yields the same demographic dominating process
for every ``eps`` of a sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .averaging import SwapGenerator, build_swap_generator
from .engine import DEFAULT_RECORD_CAP, BdsPath, simulate_bds
from .events import DEFAULT_LEVEL_SET_CAP, enumerate_level_set, event_space, level_set_index
from .intensity import EnvironmentPath, IntensityModel, Regime

UNIFORM = "uniform"
EXPONENTIAL = "exponential"


class ScaledModel(IntensityModel):
    """``model`` with swap intensities and swap bounds divided by ``eps``."""

    def __init__(self, base: IntensityModel, eps: float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        self.base = base
        self.eps = float(eps)
        self.scale = 1.0 / self.eps
        self.growth_class = base.growth_class
        self.name = f"{base.name}[eps={eps:g}]"
        super().__init__(base.p, base.feller_asserted)
        self._n_swaps = self.space.n_swaps

    def rate(self, regime, t, z, k):
        r = self.base.rate(regime, t, z, k)
        return r * self.scale if k < self._n_swaps else r

    def rates(self, regime, t, z):
        out = self.base.rates(regime, t, z)
        s = self.scale
        for k in range(self._n_swaps):
            out[k] *= s
        return out

    def birth_bound(self, regime, t, n):
        return self.base.birth_bound(regime, t, n)

    def sup_rate(self, regime, t, k, n, cap=DEFAULT_LEVEL_SET_CAP):
        r = self.base.sup_rate(regime, t, k, n, cap)
        return r * self.scale if k < self._n_swaps else r

    def sup_rates(self, regime, t, n):
        out = list(self.base.sup_rates(regime, t, n))
        for k in range(self._n_swaps):
            out[k] *= self.scale
        return out


@dataclass(frozen=True)
class TwoTimescaleConfig:
    model: IntensityModel
    eps: float
    horizon: float
    replicates: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def scaled(self) -> IntensityModel:
        return self.model if self.eps == 1 else ScaledModel(self.model, self.eps)


def simulate_two_timescale(cfg: TwoTimescaleConfig, env: EnvironmentPath, z0: Sequence[int], rng,
                           cap: int = DEFAULT_RECORD_CAP, verify: bool = False) -> BdsPath:
    return simulate_bds(cfg.scaled, env, z0, cfg.horizon, rng, cap, verify)


@dataclass
class OccupationKernel:
    """Weighted time spent in each state of ``U_n``.

    ``mass`` is unnormalized so kernels pool by addition; ``weights`` is the
    normalized law (all zeros when no time was recorded).
    """

    n: int
    p: int
    mass: np.ndarray
    weighting: str = UNIFORM

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def weights(self) -> np.ndarray:
        tot = self.mass.sum()
        return self.mass / tot if tot > 0 else np.zeros_like(self.mass)

    @property
    def states(self) -> tuple:
        return enumerate_level_set(self.n, self.p)

    def merge(self, other: "OccupationKernel") -> "OccupationKernel":
        if (other.n, other.p, other.weighting) != (self.n, self.p, self.weighting):
            raise ValueError("kernels differ in size, dimension or weighting")
        return OccupationKernel(self.n, self.p, self.mass + other.mass, self.weighting)


def default_burn_in(model: IntensityModel, regime: Regime, n: int, eps: float, c: float = 5.0) -> float:
    """``c`` times the longest mean holding time of the scaled swap chain on ``U_n``.

    Zero when the chain on ``U_n`` has no swaps at all.
    """
    gen = build_swap_generator(model, regime, 0.0, n)
    exits = -gen.matrix.diagonal()
    positive = exits[exits > 0]
    if len(positive) == 0:
        return 0.0
    return c * eps / float(positive.min())


def occupation_between_demographic_events(
        path: BdsPath, window: tuple[float, float] | None = None, weighting: str = UNIFORM,
        burn_in: float | Callable[[int], float] = 0.0) -> dict[int, OccupationKernel]:
    """Occupation of each level set, segment by segment between demographic events.

    Within a segment of constant size ``n``, the first ``burn_in`` time units
    (a number, or a function of ``n``) are discarded.  Exponential weighting
    multiplies dwell times by ``exp(-s)``.
    """
    t0, t1 = window if window is not None else (0.0, path.horizon)
    if not t1 > t0:
        raise ValueError("empty window")
    if t0 < 0 or t1 > path.horizon:
        raise ValueError("window must lie within the path horizon")
    if weighting not in (UNIFORM, EXPONENTIAL):
        raise ValueError(f"unknown weighting {weighting!r}")
    burn = burn_in if callable(burn_in) else (lambda n, b=float(burn_in): b)
    p = path.p
    space = event_space(p)
    masses: dict[int, np.ndarray] = {}
    burn_cache: dict[int, float] = {}

    z = list(path.z0)
    n = sum(z)
    seg_start = 0.0
    prev = 0.0

    def credit(a, b, state, size):
        if size not in burn_cache:
            burn_cache[size] = burn(size)
        a = max(a, seg_start + burn_cache[size], t0)
        b = min(b, t1)
        if b <= a:
            return
        w = b - a if weighting == UNIFORM else math.exp(-a) - math.exp(-b)
        mass = masses.get(size)
        if mass is None:
            mass = masses[size] = np.zeros(len(enumerate_level_set(size, p)))
        mass[level_set_index(size, p)[tuple(state)]] += w

    n_swaps = space.n_swaps
    for t, k in zip(path.times.tolist(), path.events.tolist()):
        if t > t1:
            break
        credit(prev, t, z, n)
        i, j = space.sources[k], space.targets[k]
        if i is not None:
            z[i] -= 1
        if j is not None:
            z[j] += 1
        if k >= n_swaps:
            n += space.deltas[k]
            seg_start = t
        prev = t
    credit(prev, t1, z, n)
    return {size: OccupationKernel(size, p, mass, weighting) for size, mass in masses.items()}


def pool_kernels(kernel_maps: Iterable[Mapping[int, OccupationKernel]]) -> dict[int, OccupationKernel]:
    """Sum kernels by size; order-independent up to float addition."""
    out: dict[int, OccupationKernel] = {}
    for km in kernel_maps:
        for n, k in km.items():
            out[n] = out[n].merge(k) if n in out else OccupationKernel(k.n, k.p, k.mass.copy(), k.weighting)
    return out


def averaging_residual(kernel, generator: SwapGenerator) -> np.ndarray:
    """``Gamma L`` tested against the indicator of every state of ``U_n``."""
    weights = kernel.weights if isinstance(kernel, OccupationKernel) else np.asarray(
        getattr(kernel, "probs", kernel), dtype=float)
    if len(weights) != len(generator):
        raise ValueError(f"kernel has {len(weights)} states, generator has {len(generator)}")
    return generator.matrix.T @ weights
