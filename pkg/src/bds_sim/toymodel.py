"""Two-patch toy model with density-dependent swaps, and its closed forms.

Subgroup 0 is the favorable patch (lower death rate).  Rates::

    death i        d_i z_i
    birth i        b z_i + lam
    swap 0 -> 1    k12 * (z_0 + z_1) * z_0
    swap 1 -> 0    k21 * z_1

With the environment frozen, each individual flips between the patches
independently, so the stationary law of ``z_0`` on a level set of size ``n``
is Binomial(n, 1 / (alpha n + 1)) with ``alpha = k12 / k21``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .averaging import InvariantKernel
from .events import DEFAULT_LEVEL_SET_CAP
from .intensity import IntensityModel, Regime


@dataclass(frozen=True)
class ToyParams:
    d1: float = 1.0
    d2: float = 2.0
    b: float = 0.0
    lam: float = 0.0
    k12: float = 1.0
    k21: float = 1.0

    def __post_init__(self):
        if min(self.d1, self.d2, self.b, self.lam, self.k12, self.k21) < 0:
            raise ValueError("toy parameters must be nonnegative")
        if self.d1 > self.d2:
            raise ValueError("patch 1 must be the favorable one (d1 <= d2)")

    @property
    def alpha(self) -> float:
        if self.k21 <= 0:
            raise ValueError("alpha needs k21 > 0")
        return self.k12 / self.k21

    def regime(self, label: str = "") -> Regime:
        return Regime.make(d=(self.d1, self.d2), b=self.b, lam=self.lam,
                           k12=self.k12, k21=self.k21, label=label)

    @classmethod
    def from_regime(cls, regime: Regime) -> "ToyParams":
        d1, d2 = regime.per_group("d", 2)
        return cls(d1, d2, float(regime.b), regime.lam, regime.k12, regime.k21)


class ToyModel(IntensityModel):
    """Built-in toy intensity model with closed-form dominators."""

    name = "toy"
    growth_class = "affine"

    def __init__(self):
        super().__init__(2)

    # event order for p=2: swap(0,1), swap(1,0), birth 0, birth 1, death 0, death 1
    def rate(self, regime, t, z, k):
        if k == 0:
            return regime.k12 * (z[0] + z[1]) * z[0]
        if k == 1:
            return regime.k21 * z[1]
        if k == 2:
            return regime.b * z[0] + regime.lam
        if k == 3:
            return regime.b * z[1] + regime.lam
        return regime.d[k - 4] * z[k - 4]

    def rates(self, regime, t, z):
        z0, z1 = z
        d = regime.d
        return [regime.k12 * (z0 + z1) * z0, regime.k21 * z1,
                regime.b * z0 + regime.lam, regime.b * z1 + regime.lam,
                d[0] * z0, d[1] * z1]

    def birth_bound(self, regime, t, n):
        g = regime.b * n + regime.lam
        return [g, g]

    def sup_rate(self, regime, t, k, n, cap=DEFAULT_LEVEL_SET_CAP):
        if k == 0:
            return regime.k12 * n * n
        if k == 1:
            return regime.k21 * n
        return regime.d[k - 4] * n

    def sup_rates(self, regime, t, n):
        g = regime.b * n + regime.lam
        return [regime.k12 * n * n, regime.k21 * n, g, g, regime.d[0] * n, regime.d[1] * n]


def toy_p1(alpha: float, n: int) -> float:
    """Stationary probability that one individual sits in the favorable patch."""
    if alpha < 0 or n < 0:
        raise ValueError("need alpha >= 0 and n >= 0")
    return 1.0 / (alpha * n + 1.0)


def toy_invariant(alpha: float, n: int) -> InvariantKernel:
    """Binomial(n, toy_p1) law of ``z_0`` placed on the level-set ordering.

    For ``p = 2`` the lexicographic level set is ``(0, n), (1, n-1), ..., (n, 0)``,
    so the state index equals ``z_0``.
    """
    probs = binom.pmf(np.arange(n + 1), n, toy_p1(alpha, n))
    return InvariantKernel(n=n, p=2, probs=probs / probs.sum(), residual=0.0)


def toy_averaged_death(params: ToyParams, n: int) -> float:
    """Aggregate death rate averaged over the stationary patch occupancy."""
    p1 = toy_p1(params.alpha, n)
    return (params.d1 * p1 + params.d2 * (1.0 - p1)) * n
