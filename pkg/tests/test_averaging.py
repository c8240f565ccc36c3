import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bds_sim.averaging import (KernelCache, averaged_intensity, build_swap_generator, closed_classes,
                               dense_stationary, random_swap_generator, simulate_limit_process,
                               stationary_distribution, InvariantKernel)
from bds_sim.errors import UniquenessFailure
from bds_sim.intensity import EnvironmentPath, LinearModel, Regime
from bds_sim.rng import Streams
from bds_sim.toymodel import ToyModel, ToyParams, toy_averaged_death, toy_invariant


def test_toy_generator_n2():
    gen = build_swap_generator(ToyModel(), ToyParams(1, 2, 0, 0, 1, 1).regime(), 0.0, 2)
    assert gen.states == ((0, 2), (1, 1), (2, 0))
    m = gen.matrix.toarray()
    # up moves z1 -> z1 + 1 at k21 (n - z1), down moves at k12 n z1
    assert m[0, 1] == 2 and m[1, 2] == 1
    assert m[1, 0] == 2 and m[2, 1] == 4
    assert np.allclose(m.sum(axis=1), 0)


def test_trivial_generators():
    toy = ToyModel()
    r = ToyParams(1, 2, 0, 0, 0, 0).regime()
    g0 = build_swap_generator(toy, r, 0.0, 0)
    assert g0.matrix.shape == (1, 1) and g0.matrix.nnz == 0 or g0.matrix.toarray()[0, 0] == 0
    g3 = build_swap_generator(toy, r, 0.0, 3)
    assert not np.any(g3.matrix.toarray())
    assert stationary_distribution(g0).probs.tolist() == [1.0]
    with pytest.raises(UniquenessFailure):
        stationary_distribution(g3)


def test_toy_stationary_n2():
    gen = build_swap_generator(ToyModel(), ToyParams(1, 2, 0, 0, 1, 1).regime(), 0.0, 2)
    k = stationary_distribution(gen)
    assert np.allclose(k.probs, [4 / 9, 4 / 9, 1 / 9], atol=1e-12)
    assert np.abs(gen.matrix.T @ k.probs).max() <= 1e-10


def test_single_absorbing_class_carries_all_mass():
    # only moves 1 -> 2: every state drains to (0, n)
    r = Regime.make(swap=((0.0, 1.0), (0.0, 0.0)))
    gen = build_swap_generator(LinearModel(2), r, 0.0, 3)
    assert len(closed_classes(gen)) == 1
    assert stationary_distribution(gen).probs.tolist() == [1.0, 0.0, 0.0, 0.0]


@given(st.integers(0, 10_000), st.integers(2, 4), st.data())
def test_sparse_matches_dense_oracle(seed, p, data):
    n = data.draw(st.integers(1, {2: 60, 3: 12, 4: 6}[p]))
    gen = random_swap_generator(np.random.default_rng(seed), n, p)
    k = stationary_distribution(gen)
    assert np.abs(k.probs - dense_stationary(gen)).max() < 1e-10
    assert abs(k.probs.sum() - 1) < 1e-12 and k.probs.min() >= 0


def test_sparse_generator_with_dropped_moves():
    rng = np.random.default_rng(5)
    for _ in range(40):
        gen = random_swap_generator(rng, 4, 3, sparsity=0.5)
        if len(closed_classes(gen)) != 1:
            with pytest.raises(UniquenessFailure):
                stationary_distribution(gen)
            continue
        assert np.abs(stationary_distribution(gen).probs - dense_stationary(gen)).max() < 1e-10


def test_averaged_intensity_examples():
    toy = ToyModel()
    params = ToyParams(1, 2, 0, 0, 1, 1)
    r = params.regime()
    avg = averaged_intensity(stationary_distribution(build_swap_generator(toy, r, 0.0, 2)), toy, r)
    assert avg.death_total == pytest.approx(10 / 3)
    point = InvariantKernel(2, 2, np.array([0.0, 1.0, 0.0]))
    got = averaged_intensity(point, toy, r).rates
    direct = np.array(toy.rates(r, 0.0, (1, 1)))[2:]
    assert np.allclose(got, direct)


@given(st.floats(0, 2), st.floats(0, 2), st.floats(0.01, 3), st.floats(0.01, 3), st.integers(0, 8))
def test_linear_birth_average_is_kernel_free(b, lam, k12, k21, n):
    toy = ToyModel()
    r = ToyParams(1, 2, b, lam, k12, k21).regime()
    pi = stationary_distribution(build_swap_generator(toy, r, 0.0, n))
    assert averaged_intensity(pi, toy, r).birth_total == pytest.approx(b * n + 2 * lam)
    uniform = InvariantKernel(n, 2, np.full(n + 1, 1.0 / (n + 1)))
    assert averaged_intensity(uniform, toy, r).birth_total == pytest.approx(b * n + 2 * lam)


@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(0, 1), st.floats(0.01, 3),
       st.floats(0.01, 3), st.integers(0, 10))
def test_averaged_rates_below_dominators(d1, extra, b, lam, k12, k21, n):
    toy = ToyModel()
    r = ToyParams(d1, d1 + extra, b, lam, k12, k21).regime()
    cache = KernelCache(toy)
    for m in range(n + 1):
        rates = cache.rates(r, m)
        bound = toy.sup_rates(r, 0.0, n)[2:]
        assert all(a <= c * (1 + 1e-12) + 1e-12 for a, c in zip(rates, bound))


def test_kernel_cache_reuses_entries_and_pickles():
    import pickle
    toy = ToyModel()
    cache = KernelCache(toy)
    r = ToyParams(1, 2, 0, 0, 1, 1).regime()
    assert cache.kernel(r, 3) is cache.kernel(r, 3)
    clone = pickle.loads(pickle.dumps(cache))
    assert np.array_equal(clone.kernel(r, 3).probs, cache.kernel(r, 3).probs)


def test_limit_process_without_demography_is_constant():
    toy = ToyModel()
    env = EnvironmentPath.constant(ToyParams(0, 0, 0, 0, 1, 1).regime())
    lim = simulate_limit_process(toy, env, 4, 5.0, Streams(1))
    assert len(lim) == 0 and lim.size_at(5.0) == 4


def test_limit_process_determinism():
    toy = ToyModel()
    env = EnvironmentPath.constant(ToyParams(1, 2, 0.2, 0.3, 1, 1).regime())
    a = simulate_limit_process(toy, env, 3, 4.0, Streams(2, 5))
    b = simulate_limit_process(toy, env, 3, 4.0, Streams(2, 5))
    assert np.array_equal(a.times, b.times) and np.array_equal(a.events, b.events)


def test_limit_pure_death_holding_times():
    # pure death: the first holding time from size n is exponential with the averaged death rate
    toy = ToyModel()
    params = ToyParams(1, 2, 0, 0, 0.5, 1)
    env = EnvironmentPath.constant(params.regime())
    cache = KernelCache(toy)
    for n in (1, 2, 5, 10):
        firsts = []
        for i in range(4000):
            lim = simulate_limit_process(toy, env, n, 50.0, Streams(n, i), cache, verify=(i < 5))
            firsts.append(lim.times[0])
        firsts = np.array(firsts)
        rate = toy_averaged_death(params, n)
        assert abs(firsts.mean() - 1 / rate) < 3 * firsts.std(ddof=1) / np.sqrt(len(firsts))


def test_toy_invariant_matches_solver_up_to_30():
    toy = ToyModel()
    for alpha in (0.1, 0.5, 1.0, 2.0, 10.0):
        r = ToyParams(1, 2, 0, 0, alpha, 1).regime()
        for n in range(31):
            k = stationary_distribution(build_swap_generator(toy, r, 0.0, n))
            assert np.abs(k.probs - toy_invariant(alpha, n).probs).max() <= 1e-10
