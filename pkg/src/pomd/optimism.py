"""Exploration bonuses, Bernstein confidence sets and optimistic transitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import EmpiricalModel
from .mdp_core import ContractViolation

FEAS_TOL = 1e-12


def _check_delta(delta_prime: float) -> None:
    if not 0.0 < delta_prime < 1.0:
        raise ContractViolation(f"delta' must lie in (0, 1), got {delta_prime}")


@dataclass(frozen=True, eq=False)
class BonusTable:
    b_c: np.ndarray   # cost bonus
    b_pv: np.ndarray  # transition-value bonus

    @property
    def total(self) -> np.ndarray:
        return self.b_c + self.b_pv


def stochastic_bonuses(n, S: int, A: int, H: int, K: int, delta_prime: float) -> BonusTable:
    """Hoeffding cost bonus plus the L1 transition bonus scaled by ``H``.

    The time budget inside the logarithms is ``T = K * H``.
    """
    _check_delta(delta_prime)
    T = K * H
    inv_n = 1.0 / np.maximum(np.asarray(n), 1)
    b_c = np.sqrt(2.0 * np.log(2 * S * A * H * T / delta_prime) * inv_n)
    b_pv = H * np.sqrt(4.0 * S * np.log(3 * S * A * H * T / delta_prime) * inv_n)
    return BonusTable(b_c, b_pv)


def bernstein_log_term(S: int, A: int, H: int, K: int, delta_prime: float) -> float:
    _check_delta(delta_prime)
    return float(np.log(H * S * A * K / (4.0 * delta_prime)))


def bernstein_radii(p_bar, n, S: int, A: int, H: int, K: int, delta_prime: float,
                    *, clip: bool = True) -> np.ndarray:
    """Elementwise empirical-Bernstein radii around ``p_bar``.

    ``p_bar`` is an :class:`EmpiricalModel` or a raw ``(..., S)`` array; ``n``
    broadcasts against ``p_bar[..., 0]``. Radii are clipped to ``[0, 1]``
    unless ``clip=False``.
    """
    if isinstance(p_bar, EmpiricalModel):
        p_bar = p_bar.p_bar
    p_bar = np.asarray(p_bar, dtype=float)
    L = bernstein_log_term(S, A, H, K, delta_prime)
    denom = np.maximum(np.asarray(n) - 1, 1)[..., None]
    eps = 2.0 * np.sqrt(p_bar * (1.0 - p_bar) * L / denom) + 14.0 * L / (3.0 * denom)
    return np.minimum(eps, 1.0) if clip else eps


def min_expected_value(p_bar_row, eps_row, v_next):
    """Minimise ``<p, v_next>`` over ``{|p - p_bar| <= eps, p >= 0, sum p = 1}``.

    Greedy: start every coordinate at its lower bound, then hand the remaining
    mass to coordinates in nondecreasing ``v_next`` order (ties by index) up to
    their upper bounds. Leading axes of ``p_bar_row``/``eps_row`` are batched;
    ``v_next`` is shared. Returns ``(p_hat, value)``.
    """
    p_bar_row = np.asarray(p_bar_row, dtype=float)
    eps_row = np.asarray(eps_row, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    lo = np.maximum(p_bar_row - eps_row, 0.0)
    hi = np.minimum(p_bar_row + eps_row, 1.0)
    remaining = 1.0 - lo.sum(axis=-1, keepdims=True)
    if np.any(remaining < -FEAS_TOL) or np.any(hi.sum(axis=-1) < 1.0 - FEAS_TOL):
        raise ContractViolation("confidence box does not intersect the simplex")
    order = np.argsort(v_next, kind="stable")
    caps = (hi - lo)[..., order]
    before = np.cumsum(caps, axis=-1) - caps
    extra = np.clip(remaining - before, 0.0, caps)
    p_hat = lo.copy()
    p_hat[..., order] += extra
    return p_hat, p_hat @ v_next


def reach_upper_bounds(policy, p_bar, eps, s1: int) -> np.ndarray:
    """Upper bounds ``u[h, s]`` on the probability of reaching ``s`` at step ``h``.

    Every transition entry is raised to ``min(1, p_bar + eps)`` independently
    (the maximising kernel may differ per target state) and the result is
    clipped at 1 each step.
    """
    if isinstance(p_bar, EmpiricalModel):
        p_bar = p_bar.p_bar
    policy = np.asarray(policy, dtype=float)
    H, S, _ = policy.shape
    p_up = np.minimum(np.asarray(p_bar) + np.asarray(eps), 1.0)
    u = np.zeros((H, S))
    u[0, s1] = 1.0
    for h in range(H - 1):
        u[h + 1] = np.minimum(np.einsum("s,sa,sat->t", u[h], policy[h], p_up[h]), 1.0)
    return u
