"""Intensity functionals, random environments and domination bounds.

The environment is a piecewise-constant path of :class:`Regime` records.
An intensity evaluated at time ``t`` reads the regime in force just before
``t`` (left limit), which keeps every rate predictable.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DominationViolation, EnumerationCapExceeded, ModelViolation
from .events import (
    BIRTH,
    DEFAULT_LEVEL_SET_CAP,
    EventType,
    enumerate_level_set,
    event_space,
    level_set_size,
)

#: Growth classes of birth dominators whose Feller sum is known to diverge.
CERTIFIED_GROWTH = frozenset({"linear", "affine", "linear-times-log"})


def _freeze(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(_freeze(v) for v in value)
    return float(value)


@dataclass(frozen=True)
class Regime:
    """Parameters of the environment on one constancy interval.

    ``d`` and ``b`` may be scalars or per-subgroup tuples.  ``swap`` is an
    optional ``p x p`` matrix of linear swap coefficients.  ``extras`` is a
    tuple of ``(name, value)`` pairs so that regimes stay hashable (they key
    the stationary-kernel cache).
    """

    k: float = 1.0
    d: float | tuple = 0.0
    b: float | tuple = 0.0
    lam: float = 0.0
    k12: float = 0.0
    k21: float = 0.0
    swap: tuple | None = None
    extras: tuple = ()
    label: str = ""

    @classmethod
    def make(cls, extras: Mapping[str, float] | None = None, **kw) -> "Regime":
        for key in ("d", "b", "swap"):
            if key in kw and kw[key] is not None:
                kw[key] = _freeze(kw[key])
        ex = tuple(sorted((str(k), float(v)) for k, v in (extras or {}).items()))
        return cls(extras=ex, **kw)

    def extra(self, name: str, default: float | None = None) -> float:
        for key, value in self.extras:
            if key == name:
                return value
        if default is None:
            raise KeyError(name)
        return default

    def per_group(self, name: str, p: int) -> tuple[float, ...]:
        value = getattr(self, name)
        if isinstance(value, tuple):
            if len(value) != p:
                raise ValueError(f"regime field {name!r} has {len(value)} entries, expected {p}")
            return value
        return (float(value),) * p

    def swap_matrix(self, p: int) -> tuple[tuple[float, ...], ...]:
        if self.swap is not None:
            return self.swap
        if p == 2:
            return ((0.0, self.k12), (self.k21, 0.0))
        return tuple((0.0,) * p for _ in range(p))


@dataclass(frozen=True)
class EnvironmentPath:
    """Right-continuous piecewise-constant regime path.

    ``times[0]`` is 0 and regime ``regimes[m]`` is in force on
    ``[times[m], times[m + 1])``.
    """

    times: tuple[float, ...]
    regimes: tuple[Regime, ...]

    def __post_init__(self):
        if len(self.times) != len(self.regimes) or not self.times:
            raise ValueError("need one switch time per regime")
        if self.times[0] != 0.0:
            raise ValueError("first switch time must be 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("switch times must be strictly increasing")

    @classmethod
    def constant(cls, regime: Regime) -> "EnvironmentPath":
        return cls((0.0,), (regime,))

    @property
    def is_constant(self) -> bool:
        return len(self.regimes) == 1

    def index_before(self, t: float) -> int:
        """Index of the regime in force just before ``t`` (regime 0 at t=0)."""
        return max(bisect.bisect_left(self.times, t) - 1, 0)

    def regime_before(self, t: float) -> Regime:
        return self.regimes[self.index_before(t)]

    def index_at(self, t: float) -> int:
        return bisect.bisect_right(self.times, t) - 1

    def regime_at(self, t: float) -> Regime:
        return self.regimes[self.index_at(t)]

    def switches_within(self, horizon: float) -> list[float]:
        return [s for s in self.times[1:] if s < horizon]

    def pieces(self, horizon: float) -> list[tuple[float, float, Regime]]:
        """``(start, end, regime)`` constancy intervals covering ``[0, horizon]``."""
        out = []
        bounds = [s for s in self.times if s < horizon] + [horizon]
        for m in range(len(bounds) - 1):
            out.append((bounds[m], bounds[m + 1], self.regimes[m]))
        return out


def markov_switching_environment(regimes: Sequence[Regime], generator, horizon: float,
                                 rng: np.random.Generator, initial: int = 0) -> EnvironmentPath:
    """Sample a regime path from a finite-state Markov chain with the given generator."""
    q = np.asarray(generator, dtype=float)
    m = len(regimes)
    if q.shape != (m, m):
        raise ValueError(f"generator must be {m}x{m}")
    off = q - np.diag(np.diag(q))
    if np.any(off < 0) or not np.allclose(q.sum(axis=1), 0.0):
        raise ValueError("not a generator matrix: need nonnegative off-diagonals and zero row sums")
    times, path = [0.0], [regimes[initial]]
    state, t = initial, 0.0
    while True:
        out_rate = off[state].sum()
        if out_rate <= 0:
            break
        t += rng.exponential(1.0 / out_rate)
        if t >= horizon:
            break
        state = int(rng.choice(m, p=off[state] / out_rate))
        times.append(t)
        path.append(regimes[state])
    return EnvironmentPath(tuple(times), tuple(path))


class IntensityModel:
    """Base class for BDS intensity functionals depending on (regime, t, z).

    Subclasses implement :meth:`rate` and :meth:`birth_bound`; the sup-by-size
    bound falls back to enumeration unless overridden.  Rates of events that
    consume from an empty subgroup must be exactly zero.
    """

    name = "custom"
    growth_class = "affine"

    def __init__(self, p: int, feller_asserted: bool = False):
        self.p = p
        self.space = event_space(p)
        if self.growth_class not in CERTIFIED_GROWTH and not feller_asserted:
            raise ValueError(
                f"growth class {self.growth_class!r} is not pre-certified; "
                "pass feller_asserted=True to assert the Feller condition")
        self.feller_asserted = feller_asserted

    def rate(self, regime: Regime, t: float, z: Sequence[int], k: int) -> float:
        raise NotImplementedError

    def rates(self, regime: Regime, t: float, z: Sequence[int]) -> list[float]:
        return [self.rate(regime, t, z, k) for k in range(len(self.space))]

    def birth_bound(self, regime: Regime, t: float, n: int) -> list[float]:
        """``k_t g_j(n)`` for every subgroup ``j``."""
        raise NotImplementedError

    def sup_rate(self, regime: Regime, t: float, k: int, n: int,
                 cap: int = DEFAULT_LEVEL_SET_CAP) -> float:
        """Sup of a non-birth rate over all states of size at most ``n`` (enumeration)."""
        total = sum(level_set_size(m, self.p) for m in range(n + 1))
        if total > cap:
            raise EnumerationCapExceeded(f"{total} states up to size {n} exceed cap {cap}")
        best = 0.0
        for m in range(n + 1):
            for z in enumerate_level_set(m, self.p, cap):
                best = max(best, self.rate(regime, t, z, k))
        return best

    def sup_rates(self, regime: Regime, t: float, n: int) -> list[float]:
        """Sup-by-size bounds for every event; birth slots hold the birth bound."""
        space = self.space
        out = [0.0] * len(space)
        bb = self.birth_bound(regime, t, n)
        for k in range(len(space)):
            if space.kinds[k] == BIRTH:
                out[k] = bb[space.targets[k]]
            else:
                out[k] = self.sup_rate(regime, t, k, n)
        return out


class FunctionalModel(IntensityModel):
    """Model assembled from user callables.

    ``rate_fn(regime, t, z, event)`` gives the rate of one :class:`EventType`.
    The birth dominator is ``k_fn(regime) * g[j](n)``; ``sup_fn`` optionally
    gives closed-form sup-by-size bounds ``(regime, t, event, n) -> float``.
    """

    def __init__(self, p: int, rate_fn: Callable, g: Sequence[Callable[[int], float]],
                 k_fn: Callable[[Regime], float] = lambda r: r.k, growth_class: str = "affine",
                 feller_asserted: bool = False, sup_fn: Callable | None = None, name: str = "custom"):
        self.growth_class = growth_class
        self.name = name
        super().__init__(p, feller_asserted)
        if len(g) != p:
            raise ValueError("need one growth function per subgroup")
        self._rate_fn = rate_fn
        self._g = list(g)
        self._k_fn = k_fn
        self._sup_fn = sup_fn

    def rate(self, regime, t, z, k):
        return self._rate_fn(regime, t, z, self.space.events[k])

    def birth_bound(self, regime, t, n):
        kt = self._k_fn(regime)
        return [kt * g(n) for g in self._g]

    def sup_rate(self, regime, t, k, n, cap=DEFAULT_LEVEL_SET_CAP):
        if self._sup_fn is not None:
            return self._sup_fn(regime, t, self.space.events[k], n)
        return super().sup_rate(regime, t, k, n, cap)


class LinearModel(IntensityModel):
    """Linear intensities: deaths ``d_i z_i``, swaps ``s_ij z_i``, births ``b_j z_j + lam``."""

    name = "linear"
    growth_class = "affine"

    def __init__(self, p: int):
        super().__init__(p)

    def rate(self, regime, t, z, k):
        space = self.space
        kind = space.kinds[k]
        if kind == BIRTH:
            j = space.targets[k]
            return regime.per_group("b", self.p)[j] * z[j] + regime.lam
        i = space.sources[k]
        if kind == "death":
            return regime.per_group("d", self.p)[i] * z[i]
        return regime.swap_matrix(self.p)[i][space.targets[k]] * z[i]

    def birth_bound(self, regime, t, n):
        return [bj * n + regime.lam for bj in regime.per_group("b", self.p)]

    def sup_rate(self, regime, t, k, n, cap=DEFAULT_LEVEL_SET_CAP):
        space = self.space
        i = space.sources[k]
        if space.kinds[k] == "death":
            return regime.per_group("d", self.p)[i] * n
        return regime.swap_matrix(self.p)[i][space.targets[k]] * n


def _event_index(model: IntensityModel, event) -> int:
    if isinstance(event, EventType):
        return model.space.index[event]
    return int(event)


def evaluate(model: IntensityModel, regime: Regime, t: float, z: Sequence[int]) -> np.ndarray:
    """Rate vector of ``model`` at state ``z``, validated."""
    z = tuple(int(v) for v in z)
    if any(v < 0 for v in z):
        raise ValueError(f"negative population {z}")
    rates = np.asarray(model.rates(regime, t, z), dtype=float)
    if not np.all(np.isfinite(rates)) or np.any(rates < 0):
        raise ModelViolation(f"{model.name}: invalid rates {rates} at z={z}")
    return rates


def sup_by_size(model: IntensityModel, regime: Regime, t: float, event, n: int) -> float:
    """Sup of a swap or death rate over populations of size at most ``n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = _event_index(model, event)
    if model.space.kinds[k] == BIRTH:
        raise ValueError("sup_by_size is defined for swap and death events only")
    return float(model.sup_rate(regime, t, k, n))


def dominating_birth_bound(model: IntensityModel, regime: Regime, t: float, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return np.asarray(model.birth_bound(regime, t, n), dtype=float)


@dataclass(frozen=True)
class FellerDiagnostic:
    """Partial Feller sum with a heuristic convergence flag.

    ``suspicious`` is set when the sum over ``(N/2, N]`` is small compared with
    ``1/log N``, i.e. the terms decay faster than ``1/(z log z)``.  This is a
    diagnostic; divergence cannot be decided from a finite sum.
    """

    partial_sum: float
    tail_increment: float
    suspicious: bool


def feller_diagnostic(g: Sequence[Callable[[int], float]], N: int) -> FellerDiagnostic:
    if N < 2:
        raise ValueError("need N >= 2")
    terms = []
    for z in range(1, N + 1):
        denom = sum(gj(z) for gj in g)
        if denom == 0:
            raise ValueError(f"zero denominator at z={z}")
        terms.append(1.0 / denom)
    total = math.fsum(terms)
    tail = math.fsum(terms[N // 2:])
    return FellerDiagnostic(total, tail, tail < 0.5 / math.log(N))


def check_domination(model: IntensityModel, regime: Regime, t: float, n_max: int,
                     rng: np.random.Generator | None = None, samples: int | None = None,
                     rtol: float = 1e-12) -> None:
    """Check rates against the declared dominators for states of size <= n_max.

    Exhaustive when ``samples`` is None, otherwise ``samples`` random states.
    Raises :class:`DominationViolation` on the first failure.
    """
    p = model.p
    space = model.space

    def states():
        if samples is None:
            for m in range(n_max + 1):
                yield from enumerate_level_set(m, p)
        else:
            for _ in range(samples):
                m = int(rng.integers(0, n_max + 1))
                yield tuple(int(v) for v in rng.multinomial(m, [1.0 / p] * p))

    bounds = {}
    for z in states():
        m = sum(z)
        if m not in bounds:
            bounds[m] = model.sup_rates(regime, t, m)
        rates = evaluate(model, regime, t, z)
        for k, r in enumerate(rates):
            if r > bounds[m][k] * (1 + rtol) + rtol:
                raise DominationViolation(
                    f"{model.name}: rate {r} of {space[k].label()} at z={z} "
                    f"exceeds bound {bounds[m][k]} at size {m}")
