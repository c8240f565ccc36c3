"""Exact pathwise simulation of BDS populations by thinning a dominating process.

A :class:`JumpSkeleton` holds the jumps of the dominating counting process:
birth components run at ``k_t g_j(n)`` and death/swap components at their
sup-by-size bounds, where ``n`` is the initial size plus the number of
dominating births so far.  Each record carries an absolute mark drawn
uniformly on ``(0, level]``.  Thinning walks the records in time order and
keeps a record iff its mark is at most the model rate at the current state.

Births are generated first (their rate depends only on their own count);
deaths and swaps are then homogeneous Poisson on the intervals cut by births
and regime switches, each from its own random stream.  The demographic part
of a skeleton therefore does not depend on how swaps are scaled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CorruptedSkeleton,
    DominationPreconditionError,
    DominationViolation,
    ExplosionError,
    ModelViolation,
    StrongOrderViolation,
)
from .events import event_space
from .intensity import EnvironmentPath, IntensityModel
from .rng import Streams, as_streams

DEFAULT_RECORD_CAP = 10_000_000

BIRTH_STREAM = "dominating-birth"
DEATH_STREAM = "dominating-death"
SWAP_STREAM = "dominating-swap"


@dataclass
class JumpSkeleton:
    """Jumps of a dominating process: times, event indices, marks and levels."""

    p: int
    n0: int
    horizon: float
    times: np.ndarray
    events: np.ndarray
    marks: np.ndarray
    levels: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def empty(cls, p: int, n0: int, horizon: float) -> "JumpSkeleton":
        return cls(p, n0, horizon, np.empty(0), np.empty(0, dtype=np.int64), np.empty(0), np.empty(0))

    def birth_count_before(self, t: float) -> int:
        space = event_space(self.p)
        sel = (self.events >= space.birth_slice.start) & (self.events < space.birth_slice.stop)
        return int(np.count_nonzero(self.times[sel] < t))

    def select(self, mask: np.ndarray) -> "JumpSkeleton":
        return JumpSkeleton(self.p, self.n0, self.horizon, self.times[mask], self.events[mask],
                            self.marks[mask], self.levels[mask])

    def demographic(self) -> "JumpSkeleton":
        return self.select(self.events >= event_space(self.p).n_swaps)


@dataclass
class BdsPath:
    """Accepted events of a BDS population with its initial state."""

    z0: tuple
    horizon: float
    times: np.ndarray
    events: np.ndarray
    skeleton: JumpSkeleton | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.z0)

    def __len__(self) -> int:
        return len(self.times)

    def states(self) -> np.ndarray:
        """Population after each event; row 0 is ``z0``."""
        space = event_space(self.p)
        jumps = space.effects[self.events] if len(self.events) else np.zeros((0, self.p), dtype=np.int64)
        out = np.empty((len(self.events) + 1, self.p), dtype=np.int64)
        out[0] = self.z0
        np.cumsum(jumps, axis=0, out=out[1:])
        out[1:] += np.asarray(self.z0, dtype=np.int64)
        return out

    def counts_at(self, t: float) -> np.ndarray:
        """Counting vector ``N_t`` (events at times <= t)."""
        m = int(np.searchsorted(self.times, t, side="right"))
        return event_space(self.p).counting_vector(self.events[:m])

    def state_at(self, t: float) -> np.ndarray:
        m = int(np.searchsorted(self.times, t, side="right"))
        return self.states()[m]

    def aggregate_counts(self, t: float | None = None) -> tuple[int, int, int]:
        """``(births, deaths, swaps)`` up to ``t`` (default: horizon)."""
        space = event_space(self.p)
        ev = self.events if t is None else self.events[: int(np.searchsorted(self.times, t, side="right"))]
        births = int(np.count_nonzero((ev >= space.birth_slice.start) & (ev < space.birth_slice.stop)))
        deaths = int(np.count_nonzero(ev >= space.death_slice.start))
        return births, deaths, int(np.count_nonzero(ev < space.n_swaps))


def _birth_stage(model, env, n0, horizon, rng, cap, p):
    space = model.space
    times, events, marks, levels = [], [], [], []
    m = n0
    for start, end, regime in env.pieces(horizon):
        t = start
        while True:
            rates = model.birth_bound(regime, t, m)
            total = math.fsum(rates)
            if total <= 0:
                break
            t += rng.exponential(1.0 / total)
            if t >= end:
                break
            u = total * (1.0 - rng.random())
            acc = 0.0
            for j, r in enumerate(rates):
                if r > 0 and u <= acc + r:
                    break
                acc += r
            else:
                # float round-off past the last bucket
                j = max(i for i, r in enumerate(rates) if r > 0)
                acc = math.fsum(rates[:j])
            level = rates[j]
            times.append(t)
            events.append(space.birth_index(j))
            marks.append(min(max(u - acc, math.ulp(0.0)), level))
            levels.append(level)
            m += 1
            if len(times) > cap:
                partial = JumpSkeleton(p, n0, horizon, np.array(times), np.array(events, dtype=np.int64),
                                       np.array(marks), np.array(levels))
                raise ExplosionError(f"dominating birth process exceeded {cap} records", partial)
    return times, events, marks, levels


def _homogeneous_stage(intervals, rate_fn, indices, rng):
    """Homogeneous Poisson components on each ``(start, end, key)`` interval.

    All intervals are drawn in one vectorized pass; intervals are disjoint and
    ordered, so sorting the times keeps each record in its own interval.
    """
    empty = (np.empty(0), np.empty(0, dtype=np.int64), np.empty(0), np.empty(0))
    if not intervals:
        return empty
    starts = np.array([a for a, _, _ in intervals])
    lengths = np.array([b - a for a, b, _ in intervals])
    rates = np.array([rate_fn(key) for _, _, key in intervals], dtype=float).reshape(len(intervals), -1)
    totals = rates.sum(axis=1)
    counts = rng.poisson(totals * lengths)
    n = int(counts.sum())
    if n == 0:
        return empty
    owner = np.repeat(np.arange(len(intervals)), counts)
    times = np.sort(starts[owner] + lengths[owner] * rng.random(n))
    u = totals[owner] * (1.0 - rng.random(n))
    cum = np.cumsum(rates, axis=1)[owner]
    comp = np.minimum((u[:, None] > cum).sum(axis=1), rates.shape[1] - 1)
    rows = np.arange(n)
    level = rates[owner, comp]
    mark = np.minimum(np.maximum(u - (cum[rows, comp] - level), np.finfo(float).tiny), level)
    return times, np.asarray(indices, dtype=np.int64)[comp], mark, level


def simulate_dominating(model: IntensityModel, env: EnvironmentPath, z0: Sequence[int], horizon: float,
                        rng, cap: int = DEFAULT_RECORD_CAP, include_swaps: bool = True) -> JumpSkeleton:
    """Sample the dominating skeleton on ``[0, horizon]``."""
    streams = as_streams(rng)
    p = model.p
    if len(z0) != p:
        raise ValueError(f"z0 has {len(z0)} entries, model has p={p}")
    n0 = int(sum(z0))
    if horizon <= 0:
        return JumpSkeleton.empty(p, n0, max(horizon, 0.0))
    space = model.space

    bt, be, bm, bl = _birth_stage(model, env, n0, horizon, streams(BIRTH_STREAM), cap, p)

    # intervals on which the death/swap bounds are constant: cut at births and switches
    cuts = sorted(set(bt) | set(env.switches_within(horizon)))
    bounds = [0.0] + cuts + [horizon]
    birth_set = set(bt)
    intervals = []
    m = n0
    regime_idx = 0
    for a, b in zip(bounds[:-1], bounds[1:]):
        if a in birth_set:
            m += 1
        regime_idx = env.index_at(a)
        intervals.append((a, b, (regime_idx, m)))

    sup_cache: dict = {}

    def sups(key):
        if key not in sup_cache:
            ri, size = key
            sup_cache[key] = model.sup_rates(env.regimes[ri], 0.0, size)
        return sup_cache[key]

    deaths = list(range(space.death_slice.start, space.death_slice.stop))
    dt, de, dm, dl = _homogeneous_stage(intervals, lambda key: [sups(key)[k] for k in deaths],
                                        deaths, streams(DEATH_STREAM))
    parts = [(np.asarray(bt, dtype=float), np.asarray(be, dtype=np.int64), np.asarray(bm, dtype=float),
              np.asarray(bl, dtype=float)), (dt, de, dm, dl)]
    total = len(bt) + len(dt)
    if include_swaps and space.n_swaps:
        swaps = list(range(space.n_swaps))
        expected = sum((b - a) * sum(sups(key)[k] for k in swaps) for a, b, key in intervals)
        if total + expected > cap:
            partial = _merge(p, n0, horizon, parts)
            raise ExplosionError(
                f"dominating swap process would need about {int(expected)} records (cap {cap})", partial)
        parts.append(_homogeneous_stage(intervals, lambda key: [sups(key)[k] for k in swaps],
                                        swaps, streams(SWAP_STREAM)))
    sk = _merge(p, n0, horizon, parts)
    if len(sk) > cap:
        raise ExplosionError(f"dominating skeleton has {len(sk)} records > cap {cap}", sk)
    return sk


def _merge(p, n0, horizon, parts) -> JumpSkeleton:
    times = np.concatenate([x[0] for x in parts])
    order = np.argsort(times, kind="stable")
    sk = JumpSkeleton(p, n0, horizon, times[order],
                      np.concatenate([x[1] for x in parts])[order].astype(np.int64),
                      np.concatenate([x[2] for x in parts])[order],
                      np.concatenate([x[3] for x in parts])[order])
    if len(sk) > 1 and np.any(np.diff(sk.times) <= 0):
        raise CorruptedSkeleton("skeleton times are not strictly increasing")
    return sk


def thin_to_bds(skeleton: JumpSkeleton, model: IntensityModel, env: EnvironmentPath, z0: Sequence[int],
                verify: bool = False) -> BdsPath:
    """Keep the skeleton records whose mark lies below the model rate."""
    space = model.space
    src, dst = space.sources, space.targets
    z = [int(v) for v in z0]
    switch = env.times
    regimes = env.regimes
    ri = 0
    next_switch = switch[1] if len(switch) > 1 else math.inf
    regime = regimes[0]
    rate = model.rate
    kept = []
    times = skeleton.times.tolist()
    for n, (t, k, th, lev) in enumerate(zip(times, skeleton.events.tolist(),
                                            skeleton.marks.tolist(), skeleton.levels.tolist())):
        while t > next_switch:
            ri += 1
            regime = regimes[ri]
            next_switch = switch[ri + 1] if ri + 1 < len(switch) else math.inf
        if th > lev:
            raise CorruptedSkeleton(f"record {n}: mark {th} above level {lev}")
        r = rate(regime, t, z, k)
        if verify:
            if not (r >= 0 and math.isfinite(r)):
                raise ModelViolation(f"{model.name}: rate {r} for {space[k].label()} at z={z}")
            if r > lev * (1 + 1e-12) + 1e-12:
                raise DominationViolation(
                    f"{model.name}: rate {r} of {space[k].label()} at t={t}, z={z} exceeds level {lev}")
        if th <= r:
            kept.append(n)
            i = src[k]
            if i is not None:
                z[i] -= 1
                if z[i] < 0:
                    raise ModelViolation(
                        f"{model.name}: accepted {space[k].label()} from an empty subgroup at t={t}")
            j = dst[k]
            if j is not None:
                z[j] += 1
    kept = np.asarray(kept, dtype=np.int64)
    return BdsPath(tuple(int(v) for v in z0), skeleton.horizon, skeleton.times[kept],
                   skeleton.events[kept], skeleton)


def simulate_bds(model: IntensityModel, env: EnvironmentPath, z0: Sequence[int], horizon: float, rng,
                 cap: int = DEFAULT_RECORD_CAP, verify: bool = False) -> BdsPath:
    streams = as_streams(rng)
    sk = simulate_dominating(model, env, z0, horizon, streams, cap)
    path = thin_to_bds(sk, model, env, z0, verify)
    path.provenance = streams.provenance
    return path


def check_strong_order(low: IntensityModel, high: IntensityModel, env: EnvironmentPath, z0: Sequence[int],
                       rng: np.random.Generator, samples: int = 200, mean_count: float = 1.0) -> None:
    """Sample pairs ``nu1 <= nu2`` of counting vectors and check ``low(nu1) <= high(nu2)``.

    Raises :class:`StrongOrderViolation` carrying the first counterexample.
    """
    space = low.space
    z0 = np.asarray(z0, dtype=np.int64)
    for _ in range(samples):
        nu2 = rng.poisson(mean_count, size=len(space))
        nu1 = rng.binomial(nu2, rng.random())
        za = z0 + nu1 @ space.effects
        zb = z0 + nu2 @ space.effects
        if np.any(za < 0) or np.any(zb < 0):
            continue
        for regime in env.regimes:
            ra = low.rates(regime, 0.0, tuple(int(v) for v in za))
            rb = high.rates(regime, 0.0, tuple(int(v) for v in zb))
            for k in range(len(space)):
                if ra[k] > rb[k] * (1 + 1e-12) + 1e-12:
                    raise StrongOrderViolation(
                        f"{space[k].label()}: low rate {ra[k]} at nu1 exceeds high rate {rb[k]} at nu2",
                        (nu1, nu2, k, ra[k], rb[k]))


def coupled_pair(model_low: IntensityModel, model_high: IntensityModel, env: EnvironmentPath,
                 z0: Sequence[int], horizon: float, rng, verify: bool = False,
                 cap: int = DEFAULT_RECORD_CAP) -> tuple[BdsPath, BdsPath]:
    """Thin both models from one skeleton built on ``model_high``'s dominators."""
    streams = as_streams(rng)
    if verify:
        check_strong_order(model_low, model_high, env, z0, streams("strong-order-check"))
    sk = simulate_dominating(model_high, env, z0, horizon, streams, cap)
    low = thin_to_bds(sk, model_low, env, z0, verify)
    high = thin_to_bds(sk, model_high, env, z0, verify)
    low.provenance = high.provenance = streams.provenance
    return low, high


def check_strong_domination(a, b) -> tuple[bool, tuple[float, int] | None]:
    """Whether every jump of ``a`` is a jump of ``b`` with the same component.

    ``a`` and ``b`` are :class:`BdsPath` or :class:`JumpSkeleton`.  Returns the
    first offending ``(time, event)`` of ``a`` when the relation fails.
    """
    if a.horizon != b.horizon:
        raise ValueError("paths must share the same horizon")
    jumps = dict(zip(b.times.tolist(), b.events.tolist()))
    for t, k in zip(a.times.tolist(), a.events.tolist()):
        if jumps.get(t) != k:
            return False, (t, k)
    return True, None


RateX = Callable[[float, int, Sequence[int]], float]
RateY = Callable[[int], float]


def model_rate(model: IntensityModel, env: EnvironmentPath) -> RateX:
    """``(t, k, z) -> rate`` reading the regime in force just before ``t``."""
    return lambda t, k, z: model.rate(env.regime_before(t), t, z, k)


def skeleton_rate(skeleton: JumpSkeleton) -> RateY:
    levels = skeleton.levels
    return lambda n: float(levels[n])


def path_rate(y: BdsPath, model: IntensityModel, env: EnvironmentPath) -> RateY:
    """Intensity of ``y`` at each of its own jumps (state just before the jump)."""
    states = y.states()
    times, events = y.times, y.events
    return lambda n: model.rate(env.regime_before(times[n]), times[n], tuple(states[n]), int(events[n]))


def reconstruct_by_ratio(x: BdsPath, y, rate_x: RateX, rate_y: RateY, rng) -> BdsPath:
    """Rebuild ``x`` by re-thinning ``y`` with marks placed around the ratio ``rate_x / rate_y``.

    Jumps of ``y`` that are jumps of ``x`` get mark ``U * ratio``, the other
    jumps get ``ratio + (1 - ratio) * V``, with fresh uniforms ``U`` and ``V``.
    The reconstruction keeps a jump of ``y`` iff its mark is at most the ratio
    evaluated on the reconstructed state.
    """
    ok, bad = check_strong_domination(x, y)
    if not ok:
        raise DominationPreconditionError(f"x jumps at {bad} which is not a jump of y")
    streams = as_streams(rng)
    u_rng, v_rng = streams("reconstruct-U"), streams("reconstruct-V")
    space = event_space(x.p)
    x_times = set(x.times.tolist())
    y_times, y_events = y.times.tolist(), y.events.tolist()

    # marks built along the original path x
    z = list(x.z0)
    marks = []
    for n, (t, k) in enumerate(zip(y_times, y_events)):
        ly = rate_y(n)
        if not ly > 0:
            raise DominationPreconditionError(f"y has zero intensity at its jump {n} (t={t})")
        ratio = rate_x(t, k, z) / ly
        if ratio > 1 + 1e-12:
            raise DominationPreconditionError(f"x intensity exceeds y intensity at t={t}")
        if t in x_times:
            if ratio <= 0:
                raise DominationPreconditionError(f"x jumps at t={t} with zero intensity")
            marks.append((1.0 - u_rng.random()) * ratio)
            _apply(z, space, k)
        else:
            if ratio >= 1:
                raise DominationPreconditionError(f"x skips a jump of y at t={t} with ratio 1")
            marks.append(ratio + (1.0 - ratio) * (1.0 - v_rng.random()))

    # re-thinning at level rate_x / rate_y along the reconstruction
    z = list(x.z0)
    kept = []
    for n, (t, k) in enumerate(zip(y_times, y_events)):
        if marks[n] <= rate_x(t, k, z) / rate_y(n):
            kept.append(n)
            _apply(z, space, k)
    kept = np.asarray(kept, dtype=np.int64)
    return BdsPath(x.z0, x.horizon, y.times[kept], y.events[kept], None, dict(x.provenance))


def _apply(z, space, k):
    i, j = space.sources[k], space.targets[k]
    if i is not None:
        z[i] -= 1
    if j is not None:
        z[j] += 1


def compensator_residual(path: BdsPath, model: IntensityModel, env: EnvironmentPath,
                         checkpoints: Sequence[float]) -> np.ndarray:
    """``N_t - int_0^t mu(s, Z_s-) ds`` per event type, one row per checkpoint."""
    cps = list(checkpoints)
    if any(c > path.horizon or c < 0 for c in cps):
        raise ValueError(f"checkpoints must lie in [0, {path.horizon}]")
    if any(b < a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be sorted")
    space = model.space
    n_ev = len(space)
    last = max(cps) if cps else 0.0
    # (time, order, payload): events before checkpoints at equal times (N is right-continuous)
    marks = [(t, 0, k) for t, k in zip(path.times.tolist(), path.events.tolist()) if t <= last]
    marks += [(s, 1, None) for s in env.switches_within(last)]
    marks += [(c, 2, n) for n, c in enumerate(cps)]
    marks.sort(key=lambda m: (m[0], m[1]))
    counts = [0] * n_ev
    integral = [0.0] * n_ev
    out = np.zeros((len(cps), n_ev))
    z = list(path.z0)
    t_prev = 0.0
    regime = env.regime_at(0.0)
    rates = model.rates(regime, 0.0, z)
    for t, kind, payload in marks:
        dt = t - t_prev
        if dt > 0:
            for k in range(n_ev):
                integral[k] += rates[k] * dt
            t_prev = t
        if kind == 0:
            counts[payload] += 1
            _apply(z, space, payload)
            rates = model.rates(regime, t, z)
        elif kind == 1:
            regime = env.regime_at(t)
            rates = model.rates(regime, t, z)
        else:
            out[payload] = np.asarray(counts, dtype=float) - np.asarray(integral)
    return out


def path_dump_rows(replicate: int, path: BdsPath) -> list[list]:
    """Rows ``(replicate, time, event_kind, src, dst, accepted, z_1..z_p)``.

    With a skeleton every record is listed (rejected ones with the unchanged
    state); otherwise only the accepted events.
    """
    space = event_space(path.p)
    rows = []
    z = list(path.z0)
    if path.skeleton is not None:
        accepted = set(path.times.tolist())
        records = zip(path.skeleton.times.tolist(), path.skeleton.events.tolist())
    else:
        accepted = None
        records = zip(path.times.tolist(), path.events.tolist())
    for t, k in records:
        ok = accepted is None or t in accepted
        if ok:
            _apply(z, space, k)
        ev = space[k]
        rows.append([replicate, repr(float(t)), ev.kind,
                     "inf" if ev.src is None else ev.src + 1,
                     "inf" if ev.dst is None else ev.dst + 1, int(ok)] + list(z))
    return rows
