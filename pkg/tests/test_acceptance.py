"""Acceptance gate: every criterion at its stated tolerance, one pass/fail line each.

Run alone with ``pytest tests/test_acceptance.py -v`` (about ten minutes on
one core).  The full-size experiment configs in ``configs/`` are executed
through the same runner as the CLI.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from bds_sim.averaging import build_swap_generator, dense_stationary, random_swap_generator, stationary_distribution
from bds_sim.config import ExperimentConfig
from bds_sim.experiments import _DominationJob, run_experiment
from bds_sim.parallel import run_replicates
from bds_sim.rng import RandomSource
from bds_sim.toymodel import ToyModel, ToyParams, toy_invariant

from conftest import ACCEPTANCE_LINES

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
NAMES = ["toy-verify", "domination-demo", "thinning-vs-oracle", "martingale-check", "two-timescale-sweep",
         "occupation-vs-invariant", "limit-process-convergence"]

pytestmark = pytest.mark.slow


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Each full-size experiment once on one worker: name -> (result, output dir)."""
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name in NAMES:
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
        out[name] = (run_experiment(cfg, root / name, threads=1), root / name)
    return out


def failing(result) -> list[str]:
    return [f"{r.statistic}={r.value!r}" for r in result.rows if not r.passed]


def test_criterion_1_toy_invariant_law():
    toy = ToyModel()
    start = time.perf_counter()
    worst = 0.0
    for alpha in (0.1, 0.5, 1.0, 2.0, 10.0):
        regime = ToyParams(1, 2, 0, 0, alpha, 1).regime()
        for n in range(1, 31):
            probs = stationary_distribution(build_swap_generator(toy, regime, 0.0, n)).probs
            worst = max(worst, float(np.abs(probs - toy_invariant(alpha, n).probs).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 1.0
    record(1, ok, f"max error {worst:.2e} (tol 1e-10), {elapsed:.2f} s (limit 1 s)")
    assert ok


def test_criterion_2_solver_oracle():
    rng = RandomSource(2).stream("random-generators")
    start = time.perf_counter()
    worst, largest = 0.0, 0
    for _ in range(50):
        p = int(rng.integers(2, 5))
        n = int(rng.integers(1, {2: 199, 3: 18, 4: 8}[p] + 1))
        gen = random_swap_generator(rng, n, p)
        largest = max(largest, len(gen))
        worst = max(worst, float(np.abs(stationary_distribution(gen).probs - dense_stationary(gen)).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10.0 and largest <= 200
    record(2, ok, f"max sparse-dense gap {worst:.2e} over 50 chains (<= {largest} states), {elapsed:.2f} s")
    assert ok


def test_toy_verify_experiment(runs):
    result, out = runs["toy-verify"]
    assert result.passed, failing(result)
    assert (out / "kernels.csv").exists()


def test_criterion_3_pathwise_domination(runs):
    result, _ = runs["domination-demo"]
    rows = [r for r in result.rows if not r.statistic.startswith("reconstruction")]
    ok = all(r.passed and r.value == 0 for r in rows) and len(rows) == 6 and result.elapsed < 60
    record(3, ok, f"{len(rows)} zero-violation counts over 10^4 paths at eps=1 and 0.1, "
                  f"experiment {result.elapsed:.1f} s (limit 60 s)")
    assert ok, failing(result)


def test_criterion_4_reconstruction(runs):
    cfg = ExperimentConfig.load(CONFIGS / "domination-demo.json")
    start = time.perf_counter()
    checks = run_replicates(_DominationJob(cfg, 1.0, reconstruct=True), 1000, threads=1)
    elapsed = time.perf_counter() - start
    mismatches = sum(not c[3] for c in checks)
    reported = runs["domination-demo"][0].row("reconstruction_mismatches[eps=1.0]")
    ok = mismatches == 0 and reported.value == 0 and elapsed < 30
    record(4, ok, f"{mismatches} mismatches over 1000 replicates, {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_criterion_5_distributional_uniqueness(runs):
    result, _ = runs["thinning-vs-oracle"]
    ps = {r.statistic: r.value for r in result.rows}
    ok = result.passed and len(ps) == 3 and min(ps.values()) > 0.01 and result.elapsed < 300
    record(5, ok, "chi-square p-values " + ", ".join(f"{k}={v:.3f}" for k, v in ps.items())
           + f" (need > 0.01), {result.elapsed:.1f} s (limit 300 s)")
    assert ok, failing(result)


def test_criterion_6_martingale_residuals(runs):
    result, _ = runs["martingale-check"]
    worst = max(r.value for r in result.rows)
    ok = result.passed and len(result.rows) == 18 and result.elapsed < 300
    record(6, ok, f"max |z| {worst:.2f} over 3 times x 6 event types (limit 3), "
                  f"{result.elapsed:.1f} s (limit 300 s)")
    assert ok, failing(result)


def test_criterion_7_occupation_kernel(runs):
    result, out = runs["occupation-vs-invariant"]
    tv = result.row("tv[eps=0.01]").value
    res = result.row("residual_max[eps=0.01]").value
    trend = result.row("max_tv_increase_in_se").value
    ok = result.passed and result.elapsed < 600
    record(7, ok, f"TV at eps=0.01 {tv:.4f} (< 0.05), residual {res:.4f} (< 0.1), "
                  f"worst TV increase {trend:.2f} SE (<= 1.96), {result.elapsed:.1f} s (limit 600 s)")
    assert ok, failing(result)
    tvs = [float(line.split(",")[1]) for line in (out / "tv.csv").read_text().splitlines()[1:]]
    assert len(tvs) == 5


def test_criterion_8_limit_process(runs):
    result, _ = runs["limit-process-convergence"]
    tv = result.row("tv[eps=0.01]").value
    gap = result.row("tv[eps=0.01]-tv[eps=0.3]").value
    ok = result.passed and result.elapsed < 900
    record(8, ok, f"TV at eps=0.01 {tv:.4f} (< 0.05), below eps=0.3 by {-gap:.4f}, "
                  f"{result.elapsed:.1f} s (limit 900 s)")
    assert ok, failing(result)


def test_criterion_9_reproducibility(runs, tmp_path):
    diffs = []
    for name in NAMES:
        _, first = runs[name]
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
        run_experiment(cfg, tmp_path / name, threads=2)
        a = {p.name: p.read_bytes() for p in sorted(first.glob("*.csv"))}
        b = {p.name: p.read_bytes() for p in sorted((tmp_path / name).glob("*.csv"))}
        if not a or a != b:
            diffs.append(name)
    ok = not diffs
    record(9, ok, f"CSV bytes identical for {len(NAMES) - len(diffs)}/{len(NAMES)} experiments, "
                  "1 vs 2 workers" + (f"; differing: {diffs}" if diffs else ""))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
