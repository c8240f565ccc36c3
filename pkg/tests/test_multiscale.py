import numpy as np
import pytest

from bds_sim.averaging import build_swap_generator, stationary_distribution
from bds_sim.engine import BdsPath, simulate_bds
from bds_sim.intensity import EnvironmentPath
from bds_sim.multiscale import (OccupationKernel, ScaledModel, TwoTimescaleConfig, averaging_residual,
                                default_burn_in, occupation_between_demographic_events, pool_kernels,
                                simulate_two_timescale)
from bds_sim.rng import Streams
from bds_sim.toymodel import ToyModel, ToyParams, toy_invariant


def test_eps_one_is_plain_simulation(toy, toy_env):
    a = simulate_two_timescale(TwoTimescaleConfig(toy, 1.0, 3.0), toy_env, (1, 1), Streams(4))
    b = simulate_bds(toy, toy_env, (1, 1), 3.0, Streams(4))
    assert np.array_equal(a.times, b.times) and np.array_equal(a.events, b.events)


def test_scaling_touches_swaps_only(toy, toy_params):
    r = toy_params.regime()
    s = ScaledModel(toy, 0.1)
    base, scaled = toy.rates(r, 0.0, (2, 1)), s.rates(r, 0.0, (2, 1))
    assert scaled[:2] == pytest.approx([10 * v for v in base[:2]]) and scaled[2:] == base[2:]
    assert s.sup_rates(r, 0.0, 3)[:2] == pytest.approx([10 * v for v in toy.sup_rates(r, 0.0, 3)[:2]])
    with pytest.raises(ValueError):
        TwoTimescaleConfig(toy, 0.0, 1.0)


def test_demographic_skeleton_shared_across_eps(toy, toy_env):
    for i in range(50):
        a = simulate_two_timescale(TwoTimescaleConfig(toy, 1.0, 2.0), toy_env, (1, 1), Streams(8, i))
        b = simulate_two_timescale(TwoTimescaleConfig(toy, 0.1, 2.0), toy_env, (1, 1), Streams(8, i))
        da, db = a.skeleton.demographic(), b.skeleton.demographic()
        assert np.array_equal(da.times, db.times) and np.array_equal(da.marks, db.marks)


def test_swap_count_scales_like_inverse_eps():
    # slow demography, so swaps relax between demographic events already at eps = 1
    toy = ToyModel()
    env = EnvironmentPath.constant(ToyParams(0.05, 0.1, 0.05, 0.05, 1, 1).regime())
    means = {}
    for eps in (1.0, 0.1):
        cfg = TwoTimescaleConfig(toy, eps, 2.0)
        means[eps] = np.mean([simulate_two_timescale(cfg, env, (1, 1), Streams(5, i)).aggregate_counts()[2]
                              for i in range(10_000)])
    assert means[0.1] / means[1.0] == pytest.approx(10.0, rel=0.1)


def test_point_mass_without_swaps():
    path = BdsPath((2, 1), 3.0, np.empty(0), np.empty(0, dtype=np.int64))
    k = occupation_between_demographic_events(path)
    assert list(k) == [3]
    assert k[3].weights.tolist() == [0.0, 0.0, 1.0, 0.0] and k[3].total == pytest.approx(3.0)


def test_occupation_hand_computed():
    # (1,1) -swap(1,2)@1-> (0,2) -birth(1)@2-> (1,2) until 4
    path = BdsPath((1, 1), 4.0, np.array([1.0, 2.0]), np.array([0, 2]))
    k = occupation_between_demographic_events(path)
    assert k[2].mass.tolist() == [1.0, 1.0, 0.0]
    assert k[3].mass.tolist() == [0.0, 2.0, 0.0, 0.0]
    burned = occupation_between_demographic_events(path, burn_in=0.5)
    assert burned[2].mass.tolist() == [1.0, 0.5, 0.0]
    assert burned[3].mass.tolist() == [0.0, 1.5, 0.0, 0.0]
    windowed = occupation_between_demographic_events(path, window=(0.5, 3.0))
    assert windowed[2].mass.tolist() == [1.0, 0.5, 0.0] and windowed[3].total == pytest.approx(1.0)
    expo = occupation_between_demographic_events(path, weighting="exponential")
    assert expo[2].mass[1] == pytest.approx(1 - np.exp(-1))
    with pytest.raises(ValueError):
        occupation_between_demographic_events(path, window=(1.0, 1.0))


def test_kernel_support_and_normalization(toy, toy_env):
    cfg = TwoTimescaleConfig(toy, 0.3, 3.0)
    for i in range(100):
        for n, k in occupation_between_demographic_events(simulate_two_timescale(cfg, toy_env, (2, 1),
                                                                                 Streams(1, i))).items():
            assert all(sum(z) == n for z in k.states) and len(k.mass) == len(k.states)
            if k.total > 0:
                assert k.weights.sum() == pytest.approx(1.0)


def test_pooling_is_order_independent(toy, toy_env):
    cfg = TwoTimescaleConfig(toy, 0.3, 3.0)
    maps = [occupation_between_demographic_events(simulate_two_timescale(cfg, toy_env, (1, 1), Streams(2, i)))
            for i in range(40)]
    a, b = pool_kernels(maps), pool_kernels(maps[::-1])
    assert set(a) == set(b)
    for n in a:
        assert np.allclose(a[n].mass, b[n].mass, rtol=1e-12)
    with pytest.raises(ValueError):
        OccupationKernel(2, 2, np.ones(3)).merge(OccupationKernel(3, 2, np.ones(4)))


def test_residual_examples(toy, toy_params):
    r = toy_params.regime()
    gen = build_swap_generator(toy, r, 0.0, 2)
    assert np.abs(averaging_residual(stationary_distribution(gen), gen)).max() < 1e-12
    point = OccupationKernel(2, 2, np.array([0.0, 1.0, 0.0]))
    assert np.abs(averaging_residual(point, gen)).max() > 0
    with pytest.raises(ValueError):
        averaging_residual(np.ones(4) / 4, gen)


def test_burn_in_scale(toy, toy_params):
    r = toy_params.regime()
    gen = build_swap_generator(toy, r, 0.0, 2)
    exits = -gen.matrix.diagonal()
    assert default_burn_in(toy, r, 2, 0.01) == pytest.approx(5 * 0.01 / exits.min())
    assert default_burn_in(toy, ToyParams(1, 2, 0, 0, 0, 0).regime(), 2, 0.01) == 0.0


def test_small_eps_kernel_close_to_binomial(toy, toy_params, toy_env):
    cfg = TwoTimescaleConfig(toy, 0.01, 4.0)
    r = toy_params.regime()
    pooled = pool_kernels(
        occupation_between_demographic_events(simulate_two_timescale(cfg, toy_env, (1, 1), Streams(3, i)),
                                              burn_in=lambda n: default_burn_in(toy, r, n, 0.01))
        for i in range(300))
    w = pooled[2].weights
    assert 0.5 * np.abs(w - toy_invariant(toy_params.alpha, 2).probs).sum() < 0.05
