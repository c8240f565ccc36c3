"""Frozen-environment swap chains, their invariant laws, and the averaged limit process.

With the environment frozen in one regime, swaps alone move a population of
size ``n`` around the level set ``U_n``.  When that chain has a single closed
communicating class its stationary law is unique, and averaging the
demographic rates against it gives the rates of a birth-death process on the
total size.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .engine import DEFAULT_RECORD_CAP, JumpSkeleton, simulate_dominating
from .errors import DominationViolation, ModelViolation, SolverError, UniquenessFailure
from .events import DEFAULT_LEVEL_SET_CAP, enumerate_level_set, event_space, level_set_index
from .intensity import EnvironmentPath, IntensityModel, Regime
from .rng import as_streams


@dataclass
class SwapGenerator:
    """Generator of the pure swap chain on ``U_n`` (rows sum to zero)."""

    n: int
    p: int
    states: tuple
    matrix: sp.csr_matrix

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class InvariantKernel:
    """Probability vector over the lexicographic level set ``U_n``."""

    n: int
    p: int
    probs: np.ndarray
    residual: float = 0.0

    @property
    def states(self) -> tuple:
        return enumerate_level_set(self.n, self.p)


def build_swap_generator(model: IntensityModel, regime: Regime, t: float, n: int,
                         cap: int = DEFAULT_LEVEL_SET_CAP) -> SwapGenerator:
    p = model.p
    states = enumerate_level_set(n, p, cap)
    index = level_set_index(n, p)
    space = model.space
    rows, cols, vals = [], [], []
    for a, z in enumerate(states):
        out = 0.0
        for k in range(space.n_swaps):
            r = model.rate(regime, t, z, k)
            if not (r >= 0 and math.isfinite(r)):
                raise ModelViolation(f"{model.name}: invalid swap rate {r} at z={z}")
            if r == 0:
                continue
            target = list(z)
            target[space.sources[k]] -= 1
            target[space.targets[k]] += 1
            if target[space.sources[k]] < 0:
                raise ModelViolation(f"{model.name}: swap {space[k].label()} out of empty subgroup at z={z}")
            rows.append(a)
            cols.append(index[tuple(target)])
            vals.append(r)
            out += r
        rows.append(a)
        cols.append(a)
        vals.append(-out)
    size = len(states)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    mat.sum_duplicates()
    return SwapGenerator(n, p, states, mat)


def random_swap_generator(rng: np.random.Generator, n: int, p: int, sparsity: float = 0.0,
                          rate_range: tuple[float, float] = (0.5, 2.0)) -> SwapGenerator:
    """Swap chain on ``U_n`` with i.i.d. uniform per-state rates in ``rate_range``.

    Each allowed move is dropped with probability ``sparsity``; at 0 every
    move has a positive rate and the chain is irreducible.  Bounded rates
    keep the stationary law well conditioned on long chains.
    """
    states = enumerate_level_set(n, p)
    index = level_set_index(n, p)
    rows, cols, vals = [], [], []
    for a, z in enumerate(states):
        out = 0.0
        for i in range(p):
            if z[i] == 0:
                continue
            for j in range(p):
                if i == j or rng.random() < sparsity:
                    continue
                target = list(z)
                target[i] -= 1
                target[j] += 1
                r = float(rng.uniform(*rate_range))
                rows.append(a)
                cols.append(index[tuple(target)])
                vals.append(r)
                out += r
        rows.append(a)
        cols.append(a)
        vals.append(-out)
    size = len(states)
    return SwapGenerator(n, p, states, sp.csr_matrix((vals, (rows, cols)), shape=(size, size)))


def closed_classes(gen: SwapGenerator) -> list[np.ndarray]:
    """Closed communicating classes of the positive-rate graph."""
    off = gen.matrix.copy()
    off.setdiag(0)
    off.eliminate_zeros()
    ncomp, labels = connected_components(off, directed=True, connection="strong")
    leaves = np.ones(ncomp, dtype=bool)
    coo = off.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    leaves[labels[coo.row[leaving]]] = False
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(leaves)]


def stationary_distribution(gen: SwapGenerator, tol: float = 1e-10) -> InvariantKernel:
    """Unique stationary law: ``pi L = 0`` with ``sum(pi) = 1``.

    Solved on the single closed class with one balance equation replaced by
    the normalization.  Raises :class:`UniquenessFailure` when several closed
    classes exist.
    """
    size = len(gen)
    if size == 1:
        return InvariantKernel(gen.n, gen.p, np.ones(1), 0.0)
    classes = closed_classes(gen)
    if len(classes) != 1:
        raise UniquenessFailure(
            f"swap chain on U_{gen.n} has {len(classes)} closed classes; the invariant law is not unique")
    cls = classes[0]
    probs = np.zeros(size)
    if len(cls) == 1:
        probs[cls[0]] = 1.0
    else:
        sub = gen.matrix[cls][:, cls]
        a = sub.T.tolil()
        a[len(cls) - 1, :] = np.ones(len(cls))
        rhs = np.zeros(len(cls))
        rhs[-1] = 1.0
        probs[cls] = spsolve(a.tocsc(), rhs)
    if np.any(probs < -tol):
        raise SolverError(f"stationary solve on U_{gen.n} returned negative mass {probs.min()}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    residual = float(np.abs(gen.matrix.T @ probs).max())
    scale = max(1.0, float(np.abs(gen.matrix).max()))
    if residual > tol * scale:
        raise SolverError(f"stationary residual {residual:.3e} above tolerance on U_{gen.n}")
    return InvariantKernel(gen.n, gen.p, probs, residual)


def dense_stationary(gen: SwapGenerator) -> np.ndarray:
    """Null space of ``L^T`` by SVD; the oracle for :func:`stationary_distribution`."""
    if len(gen) == 1:
        return np.ones(1)
    ns = scipy.linalg.null_space(gen.matrix.toarray().T)
    if ns.shape[1] != 1:
        raise UniquenessFailure(f"null space of dimension {ns.shape[1]}")
    v = ns[:, 0]
    return v / v.sum()


@dataclass(frozen=True)
class AveragedRates:
    """Demographic rates averaged over an invariant kernel.

    ``rates`` follows the event-space demographic order: births then deaths.
    """

    rates: np.ndarray
    birth_total: float
    death_total: float


def averaged_intensity(kernel: InvariantKernel, model: IntensityModel, regime: Regime,
                       t: float = 0.0) -> AveragedRates:
    space = model.space
    dem = space.demographic_slice
    acc = np.zeros(2 * model.p)
    for z, w in zip(kernel.states, kernel.probs):
        if w > 0:
            acc += w * np.asarray(model.rates(regime, t, z), dtype=float)[dem]
    p = model.p
    return AveragedRates(acc, float(acc[:p].sum()), float(acc[p:].sum()))


class KernelCache:
    """Invariant kernels and averaged rates keyed by ``(regime, n)``.

    Regimes are immutable, so entries never go stale.  Insertion is guarded
    by a lock; reads are lock-free.
    """

    def __init__(self, model: IntensityModel, cap: int = DEFAULT_LEVEL_SET_CAP):
        self.model = model
        self.cap = cap
        self._kernels: dict = {}
        self._rates: dict = {}
        self._lock = threading.Lock()

    def __getstate__(self):
        state = dict(self.__dict__)
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    def kernel(self, regime: Regime, n: int) -> InvariantKernel:
        key = (regime, n)
        k = self._kernels.get(key)
        if k is None:
            k = stationary_distribution(build_swap_generator(self.model, regime, 0.0, n, self.cap))
            with self._lock:
                self._kernels.setdefault(key, k)
        return k

    def rates(self, regime: Regime, n: int) -> list[float]:
        key = (regime, n)
        r = self._rates.get(key)
        if r is None:
            r = averaged_intensity(self.kernel(regime, n), self.model, regime).rates.tolist()
            with self._lock:
                self._rates.setdefault(key, r)
        return r


@dataclass
class LimitPath:
    """Demographic events of the averaged birth-death process on the total size."""

    n0: int
    p: int
    horizon: float
    times: np.ndarray
    events: np.ndarray
    sizes: np.ndarray
    skeleton: JumpSkeleton | None = None

    def __len__(self) -> int:
        return len(self.times)

    def aggregate_counts(self, t: float | None = None) -> tuple[int, int]:
        space = event_space(self.p)
        ev = self.events if t is None else self.events[: int(np.searchsorted(self.times, t, side="right"))]
        births = int(np.count_nonzero(ev < space.death_slice.start))
        return births, len(ev) - births

    def size_at(self, t: float) -> int:
        m = int(np.searchsorted(self.times, t, side="right"))
        return int(self.sizes[m - 1]) if m else self.n0


def simulate_limit_process(model: IntensityModel, env: EnvironmentPath, n0: int, horizon: float, rng,
                           cache: KernelCache | None = None, cap: int = DEFAULT_RECORD_CAP,
                           verify: bool = False) -> LimitPath:
    """Thin a demographic dominating skeleton at the averaged rates of the current size."""
    streams = as_streams(rng)
    cache = cache or KernelCache(model)
    p = model.p
    space = model.space
    z_rep = (int(n0),) + (0,) * (p - 1)
    sk = simulate_dominating(model, env, z_rep, horizon, streams, cap, include_swaps=False)
    x = int(n0)
    offset = space.n_swaps
    switch, regimes = env.times, env.regimes
    ri = 0
    next_switch = switch[1] if len(switch) > 1 else math.inf
    kept, sizes = [], []
    for n, (t, k, th, lev) in enumerate(zip(sk.times.tolist(), sk.events.tolist(),
                                            sk.marks.tolist(), sk.levels.tolist())):
        while t > next_switch:
            ri += 1
            next_switch = switch[ri + 1] if ri + 1 < len(switch) else math.inf
        r = cache.rates(regimes[ri], x)[k - offset]
        if verify and r > lev * (1 + 1e-12) + 1e-12:
            raise DominationViolation(f"averaged rate {r} above dominating level {lev} at size {x}")
        if th <= r:
            kept.append(n)
            x += space.deltas[k]
            sizes.append(x)
    kept = np.asarray(kept, dtype=np.int64)
    return LimitPath(int(n0), p, sk.horizon, sk.times[kept], sk.events[kept],
                     np.asarray(sizes, dtype=np.int64), sk)
