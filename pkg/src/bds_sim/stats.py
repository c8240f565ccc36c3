"""Independent oracle simulator and the statistics used to compare laws."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import chi2_contingency

from .engine import DEFAULT_RECORD_CAP, BdsPath
from .errors import ExplosionError, ModelViolation
from .intensity import EnvironmentPath, IntensityModel
from .rng import as_streams

ORACLE_STREAM = "oracle"


@dataclass
class EmpiricalLaw:
    """Samples of one observable across replicates.

    ``values`` is 1-d for scalar observables or ``(count, dim)`` for vectors;
    rows are then compared as joint outcomes.
    """

    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if len(self.values) == 0:
            raise ValueError(f"empirical law {self.name!r} is empty")

    @property
    def count(self) -> int:
        return len(self.values)

    def frequencies(self) -> dict:
        vals = self.values
        if vals.ndim == 1:
            keys, counts = np.unique(vals, return_counts=True)
            keys = keys.tolist()
        else:
            keys, counts = np.unique(vals, axis=0, return_counts=True)
            keys = [tuple(k) for k in keys.tolist()]
        return {k: c / len(vals) for k, c in zip(keys, counts.tolist())}

    def counts(self) -> dict:
        return {k: round(f * self.count) for k, f in self.frequencies().items()}


def oracle_simulate(model: IntensityModel, env: EnvironmentPath, z0: Sequence[int], horizon: float, rng,
                    cap: int = DEFAULT_RECORD_CAP) -> BdsPath:
    """Direct next-event simulation from the total rate at the current state.

    Uses no dominating process; it shares only the model with the thinning
    engine.
    """
    streams = as_streams(rng)
    gen = streams(ORACLE_STREAM)
    space = model.space
    z = [int(v) for v in z0]
    times, events = [], []
    pieces = env.pieces(horizon) if horizon > 0 else []
    for start, end, regime in pieces:
        t = start
        while True:
            rates = model.rates(regime, t, z)
            total = math.fsum(rates)
            if total <= 0:
                break
            t += gen.exponential(1.0 / total)
            if t >= end:
                break
            u = total * gen.random()
            acc = 0.0
            for k, r in enumerate(rates):
                acc += r
                if u < acc:
                    break
            else:
                k = max(i for i, r in enumerate(rates) if r > 0)
            i, j = space.sources[k], space.targets[k]
            if i is not None:
                z[i] -= 1
                if z[i] < 0:
                    raise ModelViolation(f"{model.name}: event out of an empty subgroup at t={t}")
            if j is not None:
                z[j] += 1
            times.append(t)
            events.append(k)
            if len(times) > cap:
                raise ExplosionError(f"oracle exceeded {cap} events")
    path = BdsPath(tuple(int(v) for v in z0), max(horizon, 0.0), np.asarray(times, dtype=float),
                   np.asarray(events, dtype=np.int64))
    path.provenance = streams.provenance
    return path


def tv_distance(a: EmpiricalLaw, b) -> float:
    """Half the L1 distance between two laws on a common discrete support.

    ``b`` is another :class:`EmpiricalLaw`, a mapping ``outcome -> probability``
    or a probability vector indexed by the integer outcome.
    """
    fa = a.frequencies()
    if isinstance(b, EmpiricalLaw):
        fb = b.frequencies()
    elif isinstance(b, Mapping):
        fb = dict(b)
    else:
        fb = {k: float(v) for k, v in enumerate(np.asarray(b, dtype=float))}
    keys = set(fa) | set(fb)
    return 0.5 * math.fsum(abs(fa.get(k, 0.0) - fb.get(k, 0.0)) for k in keys)


def tv_between_vectors(x, y) -> float:
    """Half L1 distance between two probability vectors of equal length."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("vectors must have the same shape")
    return 0.5 * float(np.abs(x - y).sum())


def _merged_table(ca: dict, cb: dict, na: int, nb: int, min_expected: float) -> np.ndarray:
    keys = sorted(set(ca) | set(cb))
    total = na + nb
    bins = []
    cur = [0, 0]
    for k in keys:
        cur[0] += ca.get(k, 0)
        cur[1] += cb.get(k, 0)
        pooled = cur[0] + cur[1]
        if min(na, nb) * pooled / total >= min_expected:
            bins.append(cur)
            cur = [0, 0]
    if cur[0] + cur[1] > 0:
        if bins:
            bins[-1][0] += cur[0]
            bins[-1][1] += cur[1]
        else:
            bins.append(cur)
    return np.array(bins, dtype=float).T


def two_sample_test(a: EmpiricalLaw, b: EmpiricalLaw, min_expected: float = 5.0) -> float:
    """Chi-square homogeneity p-value on integer outcomes.

    Adjacent outcomes (sorted) are merged until every bin has expected count
    at least ``min_expected`` in both samples.  A single bin gives p = 1.
    """
    if a.values.ndim != 1 or b.values.ndim != 1:
        raise ValueError("two_sample_test compares scalar integer observables")
    if not (np.issubdtype(a.values.dtype, np.integer) and np.issubdtype(b.values.dtype, np.integer)):
        raise ValueError("two_sample_test needs integer-valued observables")
    ka, ca = np.unique(a.values, return_counts=True)
    kb, cb = np.unique(b.values, return_counts=True)
    table = _merged_table(dict(zip(ka.tolist(), ca.tolist())), dict(zip(kb.tolist(), cb.tolist())),
                          a.count, b.count, min_expected)
    if table.shape[1] < 2:
        return 1.0
    if np.array_equal(table[0] * b.count, table[1] * a.count):
        return 1.0
    return float(chi2_contingency(table, correction=False).pvalue)


@dataclass(frozen=True)
class ZeroMeanTest:
    mean: float
    standard_error: float
    z: float
    flagged: bool


def residual_zero_test(residuals, threshold: float = 3.0) -> ZeroMeanTest:
    """Whether the sample mean of ``residuals`` is within ``threshold`` standard errors of 0."""
    vals = np.asarray(residuals.values if isinstance(residuals, EmpiricalLaw) else residuals, dtype=float)
    if len(vals) < 100:
        raise ValueError("need at least 100 residuals")
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
    if se == 0:
        z = 0.0 if mean == 0 else math.copysign(math.inf, mean)
    else:
        z = mean / se
    return ZeroMeanTest(mean, se, z, abs(z) > threshold)
