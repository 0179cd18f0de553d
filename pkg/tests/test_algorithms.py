import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pomd import (AlgoConfig, ContractViolation, StochasticEnv, default_params_adversarial,
                  default_stepsize_stochastic, evaluate_policy, make_adversarial_schedule, make_random_mdp,
                  make_rng, omd_step, optimal_values, run_pomd_adversarial, run_pomd_known, run_pomd_stochastic,
                  uniform_policy)


def test_omd_step_examples():
    d = np.array([0.3, 0.7])
    assert np.allclose(omd_step(d, [0.4, 0.9], 0.0), d)
    assert np.allclose(omd_step(d, [5.0, 5.0], 2.0), d)
    assert np.allclose(omd_step([0.5, 0.5], [0.0, 1.0], math.log(2)), [2 / 3, 1 / 3])
    with pytest.raises(ContractViolation):
        omd_step(d, [-1.0, 0.0], 0.1)
    with pytest.raises(ContractViolation):
        omd_step(d, [1.0, 0.0], -0.1)


def test_omd_step_stable_for_huge_values():
    out = omd_step([0.5, 0.5], [1e6, 1e6 + 1], 10.0)
    assert np.all(np.isfinite(out)) and out.sum() == pytest.approx(1.0)


def test_default_parameters():
    assert default_stepsize_stochastic(2, 1, 2) == pytest.approx(0.83255, abs=1e-5)
    assert default_stepsize_stochastic(3, 2, 400) == pytest.approx(default_stepsize_stochastic(3, 2, 100) / 2)
    assert default_stepsize_stochastic(3, 4, 100) == pytest.approx(default_stepsize_stochastic(3, 2, 100) / 2)
    assert default_params_adversarial(4, 2, 8)[1] == pytest.approx(0.25)
    assert default_params_adversarial(1, 2, 1)[1] == 0.5
    g1, g4 = default_params_adversarial(3, 2, 1000)[1], default_params_adversarial(3, 2, 4000)[1]
    assert g4 == pytest.approx(g1 * 4 ** (-1 / 3))


def test_config_validation():
    with pytest.raises(ContractViolation, match="K.*delta"):
        AlgoConfig(K=0, delta=1.5)
    with pytest.raises(ContractViolation, match="gamma"):
        AlgoConfig(K=5, gamma=0.0)


def test_known_constant_costs_stay_uniform():
    m = make_random_mdp(3, 3, 3, 0).with_costs(np.full((3, 3, 3), 0.4))
    run = run_pomd_known(m, AlgoConfig(K=20, snapshots=True))
    assert np.allclose(run.policies, 1 / 3)


def test_known_single_episode_is_uniform_value():
    m = make_random_mdp(3, 2, 4, 1)
    run = run_pomd_known(m, AlgoConfig(K=1))
    assert run.K == 1
    assert run.v1[0] == evaluate_policy(m.p, m.c, uniform_policy(4, 3, 2)).v[0, 0]


@pytest.mark.parametrize("seed", range(5))
def test_known_regret_bound(seed):
    m = make_random_mdp(4, 3, 4, seed)
    K = 500
    run = run_pomd_known(m, AlgoConfig(K=K))
    regret = np.sum(run.true_values - optimal_values(m)[1].v[0, 0])
    assert regret <= math.sqrt(2 * 4**4 * K * math.log(3))


def test_stochastic_first_episode_fully_clipped():
    m = make_random_mdp(3, 2, 3, 0)
    run = run_pomd_stochastic(StochasticEnv(m), AlgoConfig(K=3, snapshots=True), make_rng(0))
    assert np.all(run.q[0] == 0) and np.all(run.v[0] == 0)
    assert np.array_equal(run.policies[1], run.policies[0])
    assert np.allclose(run.policies[0], 0.5)


def test_stochastic_deterministic_and_bounded():
    m = make_random_mdp(3, 2, 3, 2)
    cfg = AlgoConfig(K=300, snapshots=True, bonus_scale=0.05)
    a = run_pomd_stochastic(StochasticEnv(m), cfg, make_rng(4))
    b = run_pomd_stochastic(StochasticEnv(m), cfg, make_rng(4))
    for name in ("v1", "true_values", "states", "actions", "costs", "policies", "q", "v"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.q.max() > 0  # shrunk bonuses let the estimates move
    assert np.all((a.q >= 0) & (a.q <= 3)) and np.all((a.v >= 0) & (a.v <= 3))
    assert a.counters.episodes == 300 and a.delta_prime == pytest.approx(0.1 / 3)


def test_adversarial_first_episode_and_determinism():
    m = make_random_mdp(3, 2, 3, 1)
    sched = make_adversarial_schedule(m, 200, "switching", 1)
    cfg = AlgoConfig(K=200, snapshots=True)
    a = run_pomd_adversarial(m, sched, cfg, make_rng(3))
    b = run_pomd_adversarial(m, sched, cfg, make_rng(3))
    for name in ("v1", "states", "policies", "q", "v", "u", "c_hat"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    # episode 1: estimator lives on the visited path only
    hs = np.arange(3)
    mask = np.zeros_like(a.c_hat[0], dtype=bool)
    mask[hs, a.states[0, :-1], a.actions[0]] = True
    assert np.all(a.c_hat[0][~mask] == 0)
    # rows whose Q entries are all equal are untouched by the update
    flat = np.ptp(a.q[0], axis=-1) == 0
    assert np.allclose(a.policies[1][flat], 0.5)
    assert np.any(a.policies[1][~flat] != 0.5)
    assert np.all(a.q >= 0) and np.all(a.q <= 3 / a.gamma + 1e-9)
    assert a.delta_prime == pytest.approx(0.1 / 6)


def test_adversarial_schedule_too_short():
    m = make_random_mdp(3, 2, 3, 1)
    with pytest.raises(ContractViolation):
        run_pomd_adversarial(m, make_adversarial_schedule(m, 5, "constant", 0), AlgoConfig(K=6), make_rng(0))


@given(st.integers(0, 10**6), st.floats(0.0, 3.0))
def test_omd_step_stays_on_simplex(seed, t):
    rng = np.random.default_rng(seed)
    d = rng.dirichlet(np.ones(4), size=(2, 3))
    q = rng.random((2, 3, 4)) * 10
    out = omd_step(d, q, t)
    assert np.all(out >= 0) and np.allclose(out.sum(-1), 1, atol=1e-12)
    # moving toward cheaper actions never raises expected loss
    assert np.all(np.einsum("ijk,ijk->ij", out, q) <= np.einsum("ijk,ijk->ij", d, q) + 1e-12)
