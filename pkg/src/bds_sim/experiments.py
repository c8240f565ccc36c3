"""Named experiments: each writes CSV data plus a results table of thresholded statistics.

Per-replicate work goes through :func:`run_replicates` with picklable job
objects, and every aggregate is computed from the replicate-ordered result
list, so outputs do not depend on the worker count.
"""
from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .averaging import (KernelCache, averaged_intensity, build_swap_generator, dense_stationary,
                        random_swap_generator, simulate_limit_process, stationary_distribution)
from .config import ExperimentConfig
from .engine import (check_strong_domination, compensator_residual, model_rate, path_dump_rows,
                     reconstruct_by_ratio, skeleton_rate)
from .errors import ConfigError
from .events import enumerate_level_set, event_space
from .multiscale import (TwoTimescaleConfig, averaging_residual, default_burn_in,
                         occupation_between_demographic_events, simulate_two_timescale)
from .parallel import run_replicates
from .plotting import emit_plot, emit_timeline
from .rng import RandomSource, Streams, derive_seed
from .stats import EmpiricalLaw, oracle_simulate, residual_zero_test, tv_between_vectors, tv_distance, two_sample_test
from .toymodel import ToyModel, ToyParams, toy_averaged_death, toy_invariant


@dataclass
class ReportRow:
    experiment: str
    statistic: str
    value: float
    threshold: float
    passed: bool

    def cells(self) -> list:
        return [self.experiment, self.statistic, repr(float(self.value)), repr(float(self.threshold)),
                "pass" if self.passed else "fail"]


@dataclass
class ExperimentResult:
    experiment: str
    rows: list[ReportRow] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def below(self, statistic: str, value: float, threshold: float, strict: bool = True) -> None:
        value, threshold = float(value), float(threshold)
        ok = value < threshold if strict else value <= threshold
        self.rows.append(ReportRow(self.experiment, statistic, value, threshold, ok))

    def above(self, statistic: str, value: float, threshold: float) -> None:
        value, threshold = float(value), float(threshold)
        self.rows.append(ReportRow(self.experiment, statistic, value, threshold, value > threshold))

    def row(self, statistic: str) -> ReportRow:
        for r in self.rows:
            if r.statistic == statistic:
                return r
        raise KeyError(statistic)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_report(result: ExperimentResult, out: Path) -> Path:
    return write_csv(out / "report.csv", ["experiment", "statistic", "value", "threshold", "pass"],
                     [r.cells() for r in result.rows])


def _eps_tag(eps: float) -> str:
    return f"eps={eps!r}"


def _z_header(p: int) -> list[str]:
    return [f"z_{i + 1}" for i in range(p)]


# ---------------------------------------------------------------- replicate jobs

@dataclass
class _Job:
    cfg: ExperimentConfig
    eps: float = 1.0
    seed: int | None = None
    verify: bool = False

    def streams(self, i: int) -> Streams:
        return Streams(self.cfg.seed if self.seed is None else self.seed, i)

    def path(self, i: int, streams: Streams | None = None):
        s = streams or self.streams(i)
        env = self.cfg.environment(s)
        tc = TwoTimescaleConfig(self.cfg.model(), self.eps, self.cfg.horizon)
        return simulate_two_timescale(tc, env, self.cfg.z0, s, verify=self.verify), env, tc


def _support_and_bound(path) -> tuple[bool, bool]:
    space = event_space(path.p)
    states = path.states()
    src = np.array([-1 if s is None else s for s in space.sources], dtype=np.int64)[path.events]
    has = src >= 0
    before = states[:-1]
    support = bool(np.all(before[np.flatnonzero(has), src[has]] >= 1)) and bool(states.min() >= 0)
    sk = path.skeleton
    births = np.sort(sk.times[(sk.events >= space.birth_slice.start) & (sk.events < space.birth_slice.stop)])
    dominated = np.searchsorted(births, path.times, side="right")
    bound = bool(np.all(states[1:].sum(axis=1) <= sum(path.z0) + dominated))
    return support, bound


@dataclass
class _DominationJob(_Job):
    reconstruct: bool = False

    def __call__(self, i: int):
        s = self.streams(i)
        path, env, tc = self.path(i, s)
        subset, _ = check_strong_domination(path, path.skeleton)
        support, bound = _support_and_bound(path)
        same = True
        if self.reconstruct:
            rebuilt = reconstruct_by_ratio(path, path.skeleton, model_rate(tc.scaled, env),
                                           skeleton_rate(path.skeleton), s)
            same = bool(np.array_equal(rebuilt.times, path.times) and np.array_equal(rebuilt.events, path.events))
        return subset, support, bound, same


@dataclass
class _DumpJob(_Job):
    def __call__(self, i: int):
        return self.path(i)[0]


@dataclass
class _CountsJob(_Job):
    oracle: bool = False

    def __call__(self, i: int):
        s = self.streams(i)
        if self.oracle:
            env = self.cfg.environment(s)
            model = TwoTimescaleConfig(self.cfg.model(), self.eps, self.cfg.horizon).scaled
            return oracle_simulate(model, env, self.cfg.z0, self.cfg.horizon, s).aggregate_counts()
        return self.path(i, s)[0].aggregate_counts()


@dataclass
class _ResidualJob(_Job):
    checkpoints: tuple = (0.5, 1.0, 2.0)

    def __call__(self, i: int):
        path, env, tc = self.path(i)
        return compensator_residual(path, tc.scaled, env, self.checkpoints)


@dataclass
class _SweepJob(_Job):
    def __call__(self, i: int):
        path = self.path(i)[0]
        dem = path.skeleton.demographic()
        digest = hashlib.sha256(dem.times.tobytes() + dem.events.tobytes() + dem.marks.tobytes()).hexdigest()
        return path.aggregate_counts(), digest


@dataclass
class _OccupationJob(_Job):
    n: int = 2
    burn_c: float = 5.0
    weighting: str = "uniform"
    _burn: dict = field(default_factory=dict, init=False, repr=False)

    def burn_in(self, n: int) -> float:
        if n not in self._burn:
            self._burn[n] = default_burn_in(self.cfg.model(), self.cfg.regimes()[0], n, self.eps, self.burn_c)
        return self._burn[n]

    def __call__(self, i: int):
        path = self.path(i)[0]
        kernels = occupation_between_demographic_events(path, weighting=self.weighting, burn_in=self.burn_in)
        k = kernels.get(self.n)
        return k.mass if k is not None else np.zeros(len(enumerate_level_set(self.n, path.p)))


@dataclass
class _LimitJob(_Job):
    cache: KernelCache | None = None

    def __call__(self, i: int):
        s = self.streams(i)
        env = self.cfg.environment(s)
        if self.cache is None:
            self.cache = KernelCache(self.cfg.model())
        lim = simulate_limit_process(self.cfg.model(), env, sum(self.cfg.z0), self.cfg.horizon, s,
                                     self.cache, verify=self.verify)
        return lim.aggregate_counts()


@dataclass
class _AggregateJob(_Job):
    def __call__(self, i: int):
        return self.path(i)[0].aggregate_counts()[:2]


# ---------------------------------------------------------------- experiments

def _dump_paths(cfg: ExperimentConfig, eps: float, count: int, out: Path, verify: bool):
    job = _DumpJob(cfg, eps, verify=verify)
    paths = [job(i) for i in range(min(count, cfg.replicates))]
    rows = [r for i, p in enumerate(paths) for r in path_dump_rows(i, p)]
    header = ["replicate", "time", "event_kind", "src", "dst", "accepted"] + _z_header(len(cfg.z0))
    return write_csv(out / f"paths_{_eps_tag(eps)}.csv", header, rows), paths


def domination_demo(cfg: ExperimentConfig, out: Path, threads: int | None, verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    n_rec = int(cfg.option("reconstruct_replicates", 1000))
    for eps in cfg.epsilons:
        checks = run_replicates(_DominationJob(cfg, eps, verify=verify), cfg.replicates, threads)
        arr = np.array(checks, dtype=bool)
        tag = _eps_tag(eps)
        res.below(f"subset_violations[{tag}]", int((~arr[:, 0]).sum()), 0, strict=False)
        res.below(f"support_violations[{tag}]", int((~arr[:, 1]).sum()), 0, strict=False)
        res.below(f"aggregate_bound_violations[{tag}]", int((~arr[:, 2]).sum()), 0, strict=False)
        f, paths = _dump_paths(cfg, eps, int(cfg.option("dump_replicates", 3)), out, verify)
        res.files.append(f)
    eps0 = cfg.epsilons[0]
    rec = run_replicates(_DominationJob(cfg, eps0, verify=verify, reconstruct=True), n_rec, threads)
    res.below(f"reconstruction_mismatches[{_eps_tag(eps0)}]", sum(not r[3] for r in rec), 0, strict=False)
    eps_min = min(cfg.epsilons)
    res.files.append(emit_timeline(_DumpJob(cfg, eps_min, verify=verify)(0), out / "timeline.svg",
                                   f"replicate 0, {_eps_tag(eps_min)}"))
    return res


def thinning_vs_oracle(cfg: ExperimentConfig, out: Path, threads: int | None, verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    eps = cfg.epsilons[0]
    thin = run_replicates(_CountsJob(cfg, eps, verify=verify), cfg.replicates, threads)
    oracle = run_replicates(_CountsJob(cfg, eps, seed=derive_seed(cfg.seed, "oracle-replicates"), oracle=True),
                            cfg.replicates, threads)
    rows = [["thinning", i, *c] for i, c in enumerate(thin)] + [["oracle", i, *c] for i, c in enumerate(oracle)]
    res.files.append(write_csv(out / "counts.csv", ["method", "replicate", "births", "deaths", "swaps"], rows))
    a, b = np.array(thin, dtype=np.int64), np.array(oracle, dtype=np.int64)
    p_min = cfg.threshold("p_value_min", 0.01)
    for j, name in enumerate(("births", "deaths", "swaps")):
        p = two_sample_test(EmpiricalLaw(f"thinning {name}", a[:, j]), EmpiricalLaw(f"oracle {name}", b[:, j]))
        res.above(f"chi2_p_value[{name}]", p, p_min)
    return res


def martingale_check(cfg: ExperimentConfig, out: Path, threads: int | None, verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    cps = tuple(float(c) for c in cfg.option("checkpoints", [0.5, 1.0, 2.0]))
    if any(c > cfg.horizon for c in cps):
        raise ConfigError("/options/checkpoints: checkpoints beyond the horizon", "/options/checkpoints")
    z_max = cfg.threshold("z_max", 3.0)
    space = cfg.model().space
    rows = []
    for eps in cfg.epsilons:
        resid = np.array(run_replicates(_ResidualJob(cfg, eps, verify=verify, checkpoints=cps),
                                        cfg.replicates, threads))
        for a, t in enumerate(cps):
            for k, ev in enumerate(space.events):
                zt = residual_zero_test(resid[:, a, k], z_max)
                rows.append([repr(eps), repr(t), ev.label(), repr(zt.mean), repr(zt.standard_error), repr(zt.z)])
                res.below(f"abs_z[{_eps_tag(eps)},t={t!r},{ev.label()}]", abs(zt.z), z_max, strict=False)
    res.files.append(write_csv(out / "residuals.csv", ["eps", "t", "event", "mean", "standard_error", "z"], rows))
    return res


def two_timescale_sweep(cfg: ExperimentConfig, out: Path, threads: int | None, verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    tol = cfg.threshold("swap_ratio_rel_tol", 0.1)
    means, digests = {}, {}
    for eps in cfg.epsilons:
        out_list = run_replicates(_SweepJob(cfg, eps, verify=verify), cfg.replicates, threads)
        means[eps] = np.array([c for c, _ in out_list], dtype=float).mean(axis=0)
        digests[eps] = [d for _, d in out_list]
    rows = [[repr(eps), *(repr(float(v)) for v in means[eps])] for eps in cfg.epsilons]
    res.files.append(write_csv(out / "sweep.csv", ["eps", "mean_births", "mean_deaths", "mean_swaps"], rows))
    eps0 = cfg.epsilons[0]
    for eps in cfg.epsilons[1:]:
        tag = _eps_tag(eps)
        res.below(f"demographic_skeleton_mismatches[{tag}]",
                  sum(a != b for a, b in zip(digests[eps0], digests[eps])), 0, strict=False)
        if means[eps0][2] > 0:
            rel = abs(means[eps][2] / means[eps0][2] / (eps0 / eps) - 1.0)
            res.below(f"swap_ratio_rel_error[{tag}]", rel, tol, strict=False)
    if len(cfg.epsilons) > 1:
        xs = list(cfg.epsilons)
        res.files.append(emit_plot([(xs, [means[e][2] for e in xs])], ["mean swaps"], out / "swaps_vs_eps.svg",
                                   "swap count against eps", "eps", "mean swap count", logx=True, logy=True))
    eps_min = min(cfg.epsilons)
    res.files.append(emit_timeline(_DumpJob(cfg, eps_min, verify=verify)(0), out / "timeline.svg",
                                   f"replicate 0, {_eps_tag(eps_min)}"))
    return res


def _bootstrap_tv(masses: np.ndarray, exact: np.ndarray, rng: np.random.Generator, draws: int) -> float:
    counts = rng.multinomial(len(masses), np.full(len(masses), 1.0 / len(masses)), size=draws)
    pooled = counts @ masses
    tot = pooled.sum(axis=1, keepdims=True)
    w = np.divide(pooled, tot, out=np.zeros_like(pooled), where=tot > 0)
    return float((0.5 * np.abs(w - exact).sum(axis=1)).std(ddof=1))


def _exact_kernel(cfg: ExperimentConfig, n: int) -> np.ndarray:
    model, regime = cfg.model(), cfg.regimes()[0]
    if isinstance(model, ToyModel):
        return toy_invariant(ToyParams.from_regime(regime).alpha, n).probs
    return stationary_distribution(build_swap_generator(model, regime, 0.0, n)).probs


def occupation_vs_invariant(cfg: ExperimentConfig, out: Path, threads: int | None,
                            verify: bool) -> ExperimentResult:
    if not cfg.is_constant_env:
        raise ConfigError("/environment/type: occupation kernels are compared in a frozen environment",
                          "/environment/type")
    res = ExperimentResult(cfg.experiment)
    n = int(cfg.option("n", 2))
    job_kw = dict(n=n, burn_c=float(cfg.option("burn_in_c", 5.0)),
                  weighting=str(cfg.option("weighting", "uniform")))
    exact = _exact_kernel(cfg, n)
    gen = build_swap_generator(cfg.model(), cfg.regimes()[0], 0.0, n)
    boot_rng = RandomSource(cfg.seed).stream("bootstrap")
    draws = int(cfg.option("bootstrap_draws", 200))
    states = enumerate_level_set(n, len(cfg.z0))
    tvs, ses, resids, rows = [], [], [], []
    for eps in cfg.epsilons:
        masses = np.array(run_replicates(_OccupationJob(cfg, eps, verify=verify, **job_kw),
                                         cfg.replicates, threads))
        pooled = masses.sum(axis=0)
        w = pooled / pooled.sum() if pooled.sum() > 0 else np.zeros_like(pooled)
        tvs.append(tv_between_vectors(w, exact))
        ses.append(_bootstrap_tv(masses, exact, boot_rng, draws))
        resids.append(float(np.abs(averaging_residual(w, gen)).max()))
        rows += [[repr(eps), n, a, *z, repr(float(w[a]))] for a, z in enumerate(states)]
    rows += [["exact", n, a, *z, repr(float(exact[a]))] for a, z in enumerate(states)]
    res.files.append(write_csv(out / "kernels.csv", ["eps", "n", "state_index", *_z_header(len(cfg.z0)), "weight"],
                               rows))
    res.files.append(write_csv(out / "tv.csv", ["eps", "tv", "bootstrap_se", "residual_max"],
                               [[repr(e), repr(t), repr(s), repr(r)]
                                for e, t, s, r in zip(cfg.epsilons, tvs, ses, resids)]))
    z = cfg.threshold("monotone_z", 1.96)
    order = np.argsort(cfg.epsilons)[::-1]
    worst = 0.0
    for a, b in zip(order, order[1:]):
        excess = (tvs[b] - tvs[a]) / max(np.hypot(ses[a], ses[b]), 1e-300)
        worst = max(worst, excess)
    if len(order) > 1:
        res.below("max_tv_increase_in_se", worst, z, strict=False)
    k_min = int(np.argmin(cfg.epsilons))
    tag = _eps_tag(cfg.epsilons[k_min])
    res.below(f"tv[{tag}]", tvs[k_min], cfg.threshold("tv_max", 0.05))
    res.below(f"residual_max[{tag}]", resids[k_min], cfg.threshold("residual_max", 0.1))
    res.files.append(emit_plot([(list(cfg.epsilons), tvs)], ["TV to invariant law"], out / "tv_vs_eps.svg",
                               f"occupation kernel at n={n}", "eps", "total variation", logx=True))
    return res


def limit_process_convergence(cfg: ExperimentConfig, out: Path, threads: int | None,
                              verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    n_lim = int(cfg.option("limit_replicates", cfg.replicates))
    lim = np.array(run_replicates(_LimitJob(cfg, seed=derive_seed(cfg.seed, "limit-replicates"), verify=verify),
                                  n_lim, threads), dtype=np.int64)
    limit_law = EmpiricalLaw("limit", lim)
    rows = [["limit", *k, repr(f)] for k, f in sorted(limit_law.frequencies().items())]
    tvs = []
    for eps in cfg.epsilons:
        law = EmpiricalLaw(_eps_tag(eps), np.array(run_replicates(_AggregateJob(cfg, eps, verify=verify),
                                                                   cfg.replicates, threads), dtype=np.int64))
        rows += [[repr(eps), *k, repr(f)] for k, f in sorted(law.frequencies().items())]
        tvs.append(tv_distance(law, limit_law))
    res.files.append(write_csv(out / "joint_law.csv", ["source", "births", "deaths", "frequency"], rows))
    res.files.append(write_csv(out / "tv.csv", ["eps", "tv"], [[repr(e), repr(t)] for e, t in zip(cfg.epsilons, tvs)]))
    order = np.argsort(cfg.epsilons)[::-1]
    for a, b in zip(order, order[1:]):
        ea, eb = cfg.epsilons[a], cfg.epsilons[b]
        res.below(f"tv[{_eps_tag(eb)}]-tv[{_eps_tag(ea)}]", tvs[b] - tvs[a], 0.0)
    k_min = order[-1]
    res.below(f"tv[{_eps_tag(cfg.epsilons[k_min])}]", tvs[k_min], cfg.threshold("tv_max", 0.05))
    res.files.append(emit_plot([(list(cfg.epsilons), tvs)], ["TV to limit process"], out / "tv_vs_eps.svg",
                               "demographic counts against the averaged process", "eps", "total variation",
                               logx=True))
    return res


def toy_verify(cfg: ExperimentConfig, out: Path, threads: int | None, verify: bool) -> ExperimentResult:
    res = ExperimentResult(cfg.experiment)
    alphas = [float(a) for a in cfg.option("alphas", [0.1, 0.5, 1.0, 2.0, 10.0])]
    n_max = int(cfg.option("n_max", 30))
    tol = cfg.threshold("tolerance", 1e-10)
    base = ToyParams.from_regime(cfg.regimes()[0])
    model = ToyModel()
    rows, worst_inv, worst_death = [], 0.0, 0.0
    for alpha in alphas:
        params = ToyParams(base.d1, base.d2, base.b, base.lam, alpha, 1.0)
        regime = params.regime()
        for n in range(1, n_max + 1):
            kern = stationary_distribution(build_swap_generator(model, regime, 0.0, n))
            exact = toy_invariant(alpha, n).probs
            worst_inv = max(worst_inv, float(np.abs(kern.probs - exact).max()))
            death = averaged_intensity(kern, model, regime).death_total
            ref = toy_averaged_death(params, n)
            worst_death = max(worst_death, abs(death - ref) / max(1.0, abs(ref)))
            rows += [[f"alpha={alpha!r}", n, a, *z, repr(float(kern.probs[a]))]
                     for a, z in enumerate(kern.states)]
    res.files.append(write_csv(out / "kernels.csv", ["regime", "n", "state_index", "z_1", "z_2", "probability"],
                               rows))
    res.below("max_abs_error_vs_binomial", worst_inv, tol, strict=False)
    res.below("max_rel_error_averaged_death", worst_death, tol, strict=False)

    rng = RandomSource(cfg.seed).stream("random-generators")
    worst_solver = 0.0
    for _ in range(int(cfg.option("random_generators", 50))):
        p = int(rng.integers(2, 5))
        n_hi = {2: 199, 3: 18, 4: 8}[p]  # at most 200 states
        gen = random_swap_generator(rng, int(rng.integers(1, n_hi + 1)), p)
        worst_solver = max(worst_solver, float(np.abs(stationary_distribution(gen).probs
                                                      - dense_stationary(gen)).max()))
    res.below("max_abs_error_sparse_vs_dense", worst_solver, tol, strict=False)
    return res


EXPERIMENT_RUNNERS: dict[str, Callable[..., ExperimentResult]] = {
    "domination-demo": domination_demo,
    "thinning-vs-oracle": thinning_vs_oracle,
    "martingale-check": martingale_check,
    "two-timescale-sweep": two_timescale_sweep,
    "occupation-vs-invariant": occupation_vs_invariant,
    "limit-process-convergence": limit_process_convergence,
    "toy-verify": toy_verify,
}


def run_experiment(cfg: ExperimentConfig, out: Path | str | None = None, threads: int | None = None,
                   verify: bool = False) -> ExperimentResult:
    """Run ``cfg`` and write its data files and ``report.csv`` under ``out``."""
    out = Path(out if out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = EXPERIMENT_RUNNERS[cfg.experiment](cfg, out, threads, verify)
    result.elapsed = time.perf_counter() - start
    result.files.append(write_report(result, out))
    return result
