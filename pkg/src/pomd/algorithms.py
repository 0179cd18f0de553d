"""Policy optimization by mirror descent: known model, stochastic and adversarial loops."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .environments import CostSchedule, StochasticEnv, Trajectory, sample_episode
from .estimation import Counters, empirical_model, importance_sampled_costs, update_counters
from .mdp_core import ContractViolation, TabularModel, _backward, uniform_policy
from .optimism import bernstein_radii, min_expected_value, reach_upper_bounds, stochastic_bonuses


def omd_step(dist, q, t: float) -> np.ndarray:
    """Exponentiated-gradient step ``dist * exp(-t q)``, normalised over the last axis."""
    dist = np.asarray(dist, dtype=float)
    q = np.asarray(q, dtype=float)
    if t < 0:
        raise ContractViolation(f"stepsize must be nonnegative, got {t}")
    if np.any(q < 0):
        raise ContractViolation("q values must be nonnegative")
    # shifting by the row minimum leaves the normalised result unchanged
    w = dist * np.exp(-t * (q - q.min(axis=-1, keepdims=True)))
    z = w.sum(axis=-1, keepdims=True)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise ContractViolation("mirror-descent normaliser vanished")
    return w / z


def default_stepsize_stochastic(A: int, H: int, K: int) -> float:
    return math.sqrt(2.0 * math.log(A) / (H * H * K))


def default_params_adversarial(A: int, H: int, K: int) -> tuple[float, float]:
    """``(t_K, gamma)`` with gamma ~ A^-1/2 K^-1/3 and t_K ~ H^-1 K^-2/3."""
    gamma = min(0.5, A ** -0.5 * K ** (-1.0 / 3.0))
    t_K = math.sqrt(math.log(A)) / (H * K ** (2.0 / 3.0))
    return t_K, gamma


@dataclass(frozen=True)
class AlgoConfig:
    """Run parameters. ``bonus_scale`` and ``radius_scale`` are ablation hooks
    for the optimism checks and stay at 1 in normal use."""

    K: int
    delta: float = 0.1
    t_K: float | None = None
    gamma: float | None = None
    snapshots: bool = False
    bonus_scale: float = 1.0
    radius_scale: float = 1.0

    def __post_init__(self):
        bad = []
        if self.K < 1:
            bad.append("K")
        if not 0.0 < self.delta < 1.0:
            bad.append("delta")
        if self.t_K is not None and not self.t_K > 0:
            bad.append("t_K")
        if self.gamma is not None and not 0.0 < self.gamma < 1.0:
            bad.append("gamma")
        if bad:
            raise ContractViolation(f"invalid AlgoConfig fields: {', '.join(bad)}")


@dataclass(eq=False)
class RunResult:
    """Per-episode records of one run; arrays are indexed by episode first.

    ``v1`` is the learner's own estimate ``V^k_1(s1)`` and ``true_values`` the
    exact value of ``pi_k`` under the episode's mean costs. Snapshot arrays are
    filled only when the run was configured with ``snapshots=True``.
    """

    algorithm: str
    model_shape: tuple[int, int, int]  # (H, S, A)
    t_K: float
    delta: float
    delta_prime: float | None
    gamma: float | None
    v1: np.ndarray
    true_values: np.ndarray
    q_min: np.ndarray
    q_max: np.ndarray
    states: np.ndarray | None = None
    actions: np.ndarray | None = None
    costs: np.ndarray | None = None
    counters: Counters | None = None
    policies: np.ndarray | None = None
    q: np.ndarray | None = None
    v: np.ndarray | None = None
    u: np.ndarray | None = None
    c_hat: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.v1)

    def trajectory(self, k: int) -> Trajectory:
        return Trajectory(self.states[k], self.actions[k], self.costs[k])

    @property
    def has_snapshots(self) -> bool:
        return self.policies is not None


class _Recorder:
    def __init__(self, K, H, S, A, snapshots, rollouts=True, adversarial=False):
        self.v1 = np.empty(K)
        self.true_values = np.empty(K)
        self.q_min = np.empty(K)
        self.q_max = np.empty(K)
        self.rollouts = rollouts
        if rollouts:
            self.states = np.empty((K, H + 1), dtype=np.int64)
            self.actions = np.empty((K, H), dtype=np.int64)
            self.costs = np.empty((K, H))
        self.snapshots = snapshots
        if snapshots:
            self.policies = np.empty((K, H, S, A))
            self.q = np.empty((K, H, S, A))
            self.v = np.empty((K, H + 1, S))
            if adversarial:
                self.u = np.empty((K, H, S))
                self.c_hat = np.empty((K, H, S, A))

    def record(self, k, s1, pi, q, v, true_value, traj=None, u=None, c_hat=None):
        self.v1[k] = v[0, s1]
        self.true_values[k] = true_value
        self.q_min[k] = q.min()
        self.q_max[k] = q.max()
        if traj is not None:
            self.states[k] = traj.states
            self.actions[k] = traj.actions
            self.costs[k] = traj.costs
        if self.snapshots:
            self.policies[k] = pi
            self.q[k] = q
            self.v[k] = v
            if u is not None:
                self.u[k] = u
                self.c_hat[k] = c_hat

    def fields(self) -> dict:
        out = dict(v1=self.v1, true_values=self.true_values, q_min=self.q_min, q_max=self.q_max)
        if self.rollouts:
            out.update(states=self.states, actions=self.actions, costs=self.costs)
        if self.snapshots:
            out.update(policies=self.policies, q=self.q, v=self.v)
            for name in ("u", "c_hat"):
                if hasattr(self, name):
                    out[name] = getattr(self, name)
        return out


def run_pomd_known(model: TabularModel, config: AlgoConfig) -> RunResult:
    """Mirror descent on exact Q-functions of the true model."""
    H, S, A = model.H, model.S, model.A
    t = config.t_K if config.t_K is not None else default_stepsize_stochastic(A, H, config.K)
    rec = _Recorder(config.K, H, S, A, config.snapshots, rollouts=False)
    pi = uniform_policy(H, S, A)
    for k in range(config.K):
        vt = _backward(model.p, model.c, pi)
        rec.record(k, model.s1, pi, vt.q, vt.v, vt.v[0, model.s1])
        pi = omd_step(pi, vt.q, t)
    return RunResult("known", (H, S, A), t, config.delta, None, None, **rec.fields())


def run_pomd_stochastic(env: StochasticEnv, config: AlgoConfig, rng: np.random.Generator) -> RunResult:
    """Optimistic mirror descent with Hoeffding bonuses (stochastic costs).

    Episode ``k`` rolls out ``pi_k``, evaluates it on the empirical model of
    episodes ``1..k-1`` with bonus-lowered costs (clipped at 0), takes a
    mirror-descent step everywhere and only then absorbs the new trajectory.
    """
    model = env.model
    H, S, A, K = model.H, model.S, model.A, config.K
    t = config.t_K if config.t_K is not None else default_stepsize_stochastic(A, H, K)
    delta_prime = config.delta / 3.0
    rec = _Recorder(K, H, S, A, config.snapshots)
    counters = Counters.zeros(H, S, A)
    pi = uniform_policy(H, S, A)
    for k in range(K):
        traj = sample_episode(env, pi, rng)
        emp = empirical_model(counters)
        bonus = stochastic_bonuses(counters.n, S, A, H, K, delta_prime).total
        c_opt = emp.c_bar - config.bonus_scale * bonus
        q = np.empty((H, S, A))
        v = np.zeros((H + 1, S))
        for h in range(H - 1, -1, -1):
            q[h] = np.maximum(c_opt[h] + emp.p_bar[h] @ v[h + 1], 0.0)
            v[h] = np.einsum("sa,sa->s", pi[h], q[h])
        true_value = _backward(model.p, model.c, pi).v[0, model.s1]
        rec.record(k, model.s1, pi, q, v, true_value, traj)
        pi = omd_step(pi, q, t)
        counters = update_counters(counters, traj)
    return RunResult("stochastic", (H, S, A), t, config.delta, delta_prime, None,
                     counters=counters, **rec.fields())


def run_pomd_adversarial(model: TabularModel, schedule: CostSchedule, config: AlgoConfig,
                         rng: np.random.Generator) -> RunResult:
    """Optimistic mirror descent for an oblivious cost schedule.

    Costs are importance-sampled with implicit exploration ``gamma`` against
    reach bounds of the previous episode's confidence set; each Q backup uses
    the in-set transition row minimising the next-step value.
    """
    H, S, A, K = model.H, model.S, model.A, config.K
    if schedule.K < K:
        raise ContractViolation(f"schedule covers {schedule.K} episodes, run needs {K}")
    t_default, gamma_default = default_params_adversarial(A, H, K)
    t = config.t_K if config.t_K is not None else t_default
    gamma = config.gamma if config.gamma is not None else gamma_default
    if not 0.0 < gamma < 1.0:
        raise ContractViolation(f"gamma must lie in (0, 1), got {gamma}")
    delta_prime = config.delta / 6.0
    rec = _Recorder(K, H, S, A, config.snapshots, adversarial=True)
    counters = Counters.zeros(H, S, A)
    pi = uniform_policy(H, S, A)
    for k in range(K):
        costs_k = schedule[k]
        traj = sample_episode((model, costs_k), pi, rng)
        emp = empirical_model(counters)
        eps = bernstein_radii(emp.p_bar, counters.n, S, A, H, K, delta_prime)
        if config.radius_scale != 1.0:
            # unvisited rows keep the full simplex so the set stays nonempty
            eps = np.where(emp.unvisited[..., None], eps, config.radius_scale * eps)
        u = reach_upper_bounds(pi, emp.p_bar, eps, model.s1)
        c_hat = importance_sampled_costs(traj, u, pi, gamma)
        q = np.empty((H, S, A))
        v = np.zeros((H + 1, S))
        for h in range(H - 1, -1, -1):
            _, next_val = min_expected_value(emp.p_bar[h], eps[h], v[h + 1])
            q[h] = c_hat[h] + next_val
            v[h] = np.einsum("sa,sa->s", pi[h], q[h])
        true_value = _backward(model.p, costs_k, pi).v[0, model.s1]
        rec.record(k, model.s1, pi, q, v, true_value, traj, u, c_hat)
        pi = omd_step(pi, q, t)
        counters = update_counters(counters, traj)
    return RunResult("adversarial", (H, S, A), t, config.delta, delta_prime, gamma,
                     counters=counters, **rec.fields())


def with_snapshots(config: AlgoConfig) -> AlgoConfig:
    return replace(config, snapshots=True)
