import numpy as np
import pytest
from hypothesis import given, strategies as st

from pomd import (ContractViolation, Counters, StochasticEnv, Trajectory, compute_occupancy, empirical_model,
                  importance_sampled_costs, make_random_mdp, make_rng, sample_episode, uniform_policy,
                  update_counters)


def _traj(states, actions, costs):
    return Trajectory(np.array(states), np.array(actions), np.array(costs, dtype=float))


def test_single_update_and_additivity():
    c0 = Counters.zeros(2, 3, 2)
    tr = _traj([0, 2, 1], [1, 0], [0.5, 1.0])
    c1 = update_counters(c0, tr)
    assert np.all(c1.n.sum(axis=(1, 2)) == 1) and c1.episodes == 1
    assert c0.n.sum() == 0  # input untouched
    c2 = update_counters(c1, tr)
    assert np.array_equal(c2.n, 2 * c1.n) and np.array_equal(c2.m, 2 * c1.m)
    assert np.allclose(c2.cost_sum, 2 * c1.cost_sum)
    with pytest.raises(ContractViolation):
        update_counters(c0, _traj([0, 1], [0], [0.0]))


def test_empirical_model_conventions():
    c = Counters.zeros(1, 2, 1)
    c.n[0, 0, 0] = 2
    c.m[0, 0, 0] = [2, 0]
    c.cost_sum[0, 0, 0] = 1.0
    emp = empirical_model(c)
    assert np.array_equal(emp.p_bar[0, 0, 0], [1.0, 0.0]) and emp.c_bar[0, 0, 0] == 0.5
    assert np.all(emp.p_bar[0, 1, 0] == 0) and emp.unvisited[0, 1, 0] and emp.c_bar[0, 1, 0] == 0


def test_counts_track_occupancy():
    m = make_random_mdp(3, 2, 3, 1)
    pi = uniform_policy(3, 3, 2)
    env, rng, c = StochasticEnv(m), make_rng(3), Counters.zeros(3, 3, 2)
    k = 10_000
    for _ in range(k):
        c = update_counters(c, sample_episode(env, pi, rng))
    w = compute_occupancy(pi, m.p, 0).w
    se = np.sqrt(w * (1 - w) / k)
    assert np.all(np.abs(c.n / k - w) <= 3 * se + 1e-12)


def test_empirical_row_lln():
    m = make_random_mdp(3, 1, 1, 8)
    env, rng, c = StochasticEnv(m), make_rng(4), Counters.zeros(1, 3, 1)
    N = 100_000
    for _ in range(N):
        c = update_counters(c, sample_episode(env, uniform_policy(1, 3, 1), rng))
    p, p_bar = m.p[0, 0, 0], empirical_model(c).p_bar[0, 0, 0]
    assert np.all(np.abs(p_bar - p) <= 3 * np.sqrt(p * (1 - p) / N))


def test_importance_sampled_formula():
    tr = _traj([0, 1], [1], [1.0])
    u = np.array([[1.0, 0.0]])
    pi = np.array([[[0.6, 0.4], [0.5, 0.5]]])
    c_hat = importance_sampled_costs(tr, u, pi, 0.1)
    assert c_hat[0, 0, 1] == pytest.approx(2.0, abs=1e-14)
    assert c_hat[0, 0, 0] == 0 and np.count_nonzero(c_hat) == 1
    with pytest.raises(ContractViolation):
        importance_sampled_costs(tr, u, pi, 0.0)


def test_importance_sampling_unbiased_with_true_occupancy():
    m = make_random_mdp(2, 2, 2, 3)
    pi = uniform_policy(2, 2, 2)
    costs = np.random.default_rng(0).random(m.c.shape)
    d = compute_occupancy(pi, m.p, 0).d
    rng, N = make_rng(6), 100_000
    total = np.zeros(m.c.shape)
    sq = np.zeros(m.c.shape)
    for _ in range(N):
        est = importance_sampled_costs(sample_episode((m, costs), pi, rng), d, pi, 0.0, strict=False)
        total += est
        sq += est**2
    mean = total / N
    se = np.sqrt(np.maximum(sq / N - mean**2, 0) / N)
    reach = (d > 0)[..., None] & np.ones_like(costs, dtype=bool)
    assert np.all(np.abs(mean - costs)[reach] <= 3 * se[reach] + 1e-12)


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=15))
def test_counter_invariants(seeds):
    m = make_random_mdp(3, 2, 3, 0)
    c = Counters.zeros(3, 3, 2)
    for s in seeds:
        c = update_counters(c, sample_episode(StochasticEnv(m), uniform_policy(3, 3, 2), make_rng(s)))
    assert np.array_equal(c.m.sum(-1), c.n)
    assert np.all(c.cost_sum <= c.n) and np.all(c.n >= 0)
    assert np.all(c.n.sum(axis=(1, 2)) == len(seeds))
    emp = empirical_model(c)
    visited = ~emp.unvisited
    assert np.allclose(emp.p_bar[visited].sum(-1), 1.0, atol=1e-12)
    assert np.all(emp.p_bar[emp.unvisited] == 0)
    assert np.all((emp.c_bar >= 0) & (emp.c_bar <= 1))


@given(st.integers(0, 10**6), st.floats(0.01, 0.5))
def test_importance_estimates_bounded(seed, gamma):
    m = make_random_mdp(3, 2, 3, seed)
    rng = np.random.default_rng(seed)
    pi = rng.dirichlet(np.ones(2), size=(3, 3))
    u = rng.random((3, 3))
    est = importance_sampled_costs(sample_episode(StochasticEnv(m), pi, make_rng(seed)), u, pi, gamma)
    assert np.all((est >= 0) & (est <= 1 / gamma + 1e-12))
    assert np.all(np.count_nonzero(est.reshape(3, -1), axis=1) <= 1)
