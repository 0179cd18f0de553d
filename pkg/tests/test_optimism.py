import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from pomd import (ContractViolation, compute_occupancy, make_random_mdp, bernstein_radii, min_expected_value,
                  reach_upper_bounds, stochastic_bonuses, uniform_policy)
from pomd.optimism import bernstein_log_term
from pomd.oracles import grid_min_oracle

from conftest import random_kernel, random_policy


def test_bonus_conventions():
    b0 = stochastic_bonuses(np.array([0]), 3, 2, 4, 100, 0.01)
    b1 = stochastic_bonuses(np.array([1]), 3, 2, 4, 100, 0.01)
    b4 = stochastic_bonuses(np.array([4]), 3, 2, 4, 100, 0.01)
    assert b0.b_c == b1.b_c and b0.b_pv == b1.b_pv
    assert b4.b_c == pytest.approx(b1.b_c / 2) and b4.b_pv == pytest.approx(b1.b_pv / 2)
    assert np.all(b0.total > 0)


def test_cost_bonus_hand_value():
    # choose delta' so that ln(2 S A H T / delta') = 2 with T = K H
    S, A, H, K = 1, 1, 1, 1
    dp = 2 * S * A * H * (K * H) / math.e**2
    assert stochastic_bonuses(np.array([8]), S, A, H, K, dp).b_c[0] == pytest.approx(0.70711, abs=1e-5)


def test_bernstein_hand_value():
    # L = ln(H S A K / (4 delta')) = 3
    H = S = A = 1
    K = 4
    dp = math.exp(-3)
    assert bernstein_log_term(S, A, H, K, dp) == pytest.approx(3.0)
    eps = bernstein_radii(np.array([0.5]), np.array(301), S, A, H, K, dp)
    assert eps[0] == pytest.approx(0.1 + 42 / 900, abs=1e-12)


def test_bernstein_degenerate_entries():
    L = bernstein_log_term(2, 2, 3, 50, 0.01)
    for n in (0, 1, 2, 40):
        eps = bernstein_radii(np.array([0.0, 1.0]), np.array(n), 2, 2, 3, 50, 0.01)
        assert np.allclose(eps, min(1.0, 14 * L / (3 * max(n - 1, 1))))
    assert np.all(bernstein_radii(np.array([0.3, 0.7]), np.array(1), 2, 2, 3, 50, 0.01) == 1.0)


def test_min_expected_value_examples():
    p_hat, val = min_expected_value([0.5, 0.5], [0.2, 0.2], [0.0, 1.0])
    assert np.allclose(p_hat, [0.7, 0.3]) and val == pytest.approx(0.3)
    assert grid_min_oracle([0.5, 0.5], [0.2, 0.2], [0.0, 1.0]) == pytest.approx(0.3, abs=0.01)
    p_bar = np.array([0.2, 0.3, 0.5])
    p_hat, val = min_expected_value(p_bar, np.zeros(3), [3.0, 1.0, 2.0])
    assert np.array_equal(p_hat, p_bar)
    _, val = min_expected_value(p_bar, np.full(3, 0.4), np.full(3, 1.7))
    assert val == pytest.approx(1.7)


def test_min_expected_value_infeasible():
    with pytest.raises(ContractViolation):
        min_expected_value([0.9, 0.9], [0.0, 0.0], [0.0, 1.0])


def test_reach_bounds_examples():
    m = make_random_mdp(3, 2, 4, 0)
    pi = random_policy(np.random.default_rng(0), 4, 3, 2)
    u = reach_upper_bounds(pi, m.p, np.zeros(m.p.shape), 0)
    assert np.allclose(u, compute_occupancy(pi, m.p, 0).d, atol=1e-15)
    assert u[0, 0] == 1 and np.all(u[0, 1:] == 0)
    p_bar = np.zeros((2, 2, 1, 2))
    p_bar[:, :, 0] = [0.5, 0.5]
    u = reach_upper_bounds(uniform_policy(2, 2, 1), p_bar, np.full(p_bar.shape, 0.1), 0)
    assert u[1, 1] == pytest.approx(0.6)


rows = st.integers(2, 6).flatmap(lambda S: st.tuples(
    st.just(S), st.integers(0, 10**6), st.floats(0.0, 0.6)))


@given(rows)
def test_min_expected_value_matches_lp(args):
    S, seed, scale = args
    rng = np.random.default_rng(seed)
    p_bar = rng.dirichlet(np.ones(S))
    eps = scale * rng.random(S)
    v = rng.random(S) * 5
    p_hat, val = min_expected_value(p_bar, eps, v)
    lo, hi = np.maximum(p_bar - eps, 0), np.minimum(p_bar + eps, 1)
    assert np.all(p_hat >= lo - 1e-12) and np.all(p_hat <= hi + 1e-12)
    assert abs(p_hat.sum() - 1) <= 1e-12
    assert val <= p_bar @ v + 1e-12
    lp = linprog(v, A_eq=np.ones((1, S)), b_eq=[1.0], bounds=list(zip(lo, hi)), method="highs")
    assert lp.status == 0 and val == pytest.approx(lp.fun, abs=1e-9)


@given(st.integers(0, 10**6), st.floats(0.0, 0.3))
def test_reach_bounds_dominate_in_set_kernels(seed, scale):
    rng = np.random.default_rng(seed)
    H, S, A = 3, 3, 2
    p_bar = random_kernel(rng, H, S, A)
    eps = np.full(p_bar.shape, scale)
    pi = random_policy(rng, H, S, A)
    u = reach_upper_bounds(pi, p_bar, eps, 0)
    assert np.all((u >= 0) & (u <= 1))
    # any kernel inside the box is dominated
    for _ in range(5):
        q = np.clip(p_bar + rng.uniform(-scale, scale, p_bar.shape), 0, None)
        q /= q.sum(-1, keepdims=True)
        if np.all(np.abs(q - p_bar) <= eps + 1e-12):
            assert np.all(compute_occupancy(pi, q, 0).d <= u + 1e-12)


@given(st.integers(0, 200), st.integers(0, 10**6))
def test_radii_monotone_in_n(n, seed):
    p_bar = np.random.default_rng(seed).dirichlet(np.ones(4))
    a = bernstein_radii(p_bar, np.array(n), 4, 2, 3, 100, 0.01)
    b = bernstein_radii(p_bar, np.array(n + 1), 4, 2, 3, 100, 0.01)
    assert np.all(b <= a + 1e-15) and np.all(a >= 0) and np.all(a <= 1)
    bonus = stochastic_bonuses(np.array([n, n + 1]), 4, 2, 3, 100, 0.01).total
    assert bonus[1] <= bonus[0] and np.all(bonus > 0)
