"""Visit counters, the empirical model and the importance-sampled cost estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environments import Trajectory
from .mdp_core import ContractViolation


@dataclass(frozen=True, eq=False)
class Counters:
    n: np.ndarray         # (H, S, A) visits
    m: np.ndarray         # (H, S, A, S) transition counts
    cost_sum: np.ndarray  # (H, S, A) sum of realized costs
    episodes: int = 0

    @classmethod
    def zeros(cls, H: int, S: int, A: int) -> "Counters":
        return cls(
            np.zeros((H, S, A), dtype=np.int64),
            np.zeros((H, S, A, S), dtype=np.int64),
            np.zeros((H, S, A)),
        )

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "n": self.n.tolist(),
            "m": self.m.tolist(),
            "cost_sum": self.cost_sum.tolist(),
        }


def update_counters(counters: Counters, traj: Trajectory) -> Counters:
    """New counters with one more episode; ``counters`` is left untouched."""
    H = counters.n.shape[0]
    if len(traj) != H:
        raise ContractViolation(f"trajectory has {len(traj)} steps, expected {H}")
    hs = np.arange(H)
    s, a, s_next = traj.states[:-1], traj.actions, traj.states[1:]
    n, m, cost_sum = counters.n.copy(), counters.m.copy(), counters.cost_sum.copy()
    # one (s, a) per step, so fancy-index increments never collide
    n[hs, s, a] += 1
    m[hs, s, a, s_next] += 1
    cost_sum[hs, s, a] += traj.costs
    return Counters(n, m, cost_sum, counters.episodes + 1)


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    p_bar: np.ndarray      # (H, S, A, S); all-zero rows where unvisited
    c_bar: np.ndarray      # (H, S, A)
    unvisited: np.ndarray  # (H, S, A) bool


def empirical_model(counters: Counters) -> EmpiricalModel:
    denom = np.maximum(counters.n, 1)
    return EmpiricalModel(
        counters.m / denom[..., None],
        counters.cost_sum / denom,
        counters.n == 0,
    )


def importance_sampled_costs(traj: Trajectory, u, policy, gamma: float, *, strict: bool = True) -> np.ndarray:
    """Implicit-exploration cost estimate for one episode.

    Each visited pair gets ``cost / (u[h, s] * policy[h, s, a] + gamma)``; all
    other entries are zero. ``strict=False`` admits ``gamma == 0``, which is
    only meaningful in unbiasedness checks.
    """
    if gamma < 0 or (strict and gamma == 0):
        raise ContractViolation(f"gamma must be positive, got {gamma}")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ContractViolation("reach bounds must be nonnegative")
    H, S, A = policy.shape
    hs = np.arange(H)
    s, a = traj.states[:-1], traj.actions
    c_hat = np.zeros((H, S, A))
    c_hat[hs, s, a] = traj.costs / (u[hs, s] * policy[hs, s, a] + gamma)
    return c_hat
