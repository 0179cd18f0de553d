"""Brute-force oracles and analytic diagnostics.

The oracles here deliberately avoid the vectorised code paths they are used to
check: policy enumeration has its own batched evaluator, the mirror-descent
replay has its own exponential update, and the grid minimiser is exhaustive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import RunResult
from .environments import CostSchedule, sample_episode
from .mdp_core import ContractViolation, TabularModel, compute_occupancy, evaluate_policy
from .optimism import bernstein_radii

MAX_ENUMERATED = 10**6


def enumerate_optimal(model: TabularModel) -> float:
    """Minimum of ``V_1(s1)`` over every deterministic Markov policy."""
    H, S, A = model.H, model.S, model.A
    if A ** (S * H) > MAX_ENUMERATED:
        raise ContractViolation(f"A^(S*H) = {A ** (S * H)} policies exceeds {MAX_ENUMERATED}")
    best = math.inf
    chunk = 4096
    all_policies = itertools.product(range(A), repeat=S * H)
    while True:
        block = list(itertools.islice(all_policies, chunk))
        if not block:
            break
        acts = np.array(block, dtype=int).reshape(len(block), H, S)
        v = np.zeros((len(block), S))
        for h in range(H - 1, -1, -1):
            # value of the chosen action in each state, one row per policy
            cost = model.c[h][np.arange(S), acts[:, h]]           # (n, S)
            trans = model.p[h][np.arange(S), acts[:, h]]          # (n, S, S)
            v = cost + np.einsum("nst,nt->ns", trans, v)
        best = min(best, float(v[:, model.s1].min()))
    return best


def check_extended_value_difference(pi, pi_prime, M, M_prime, q_hat=None) -> float:
    """Absolute residual of the extended value-difference identity.

    ``M`` and ``M_prime`` are ``(p, c)`` pairs (or models). ``q_hat`` is any
    Q-table; when omitted the exact Q of ``pi`` on ``M`` is used. Both
    expectations on the right are taken under ``(pi_prime, p_prime)``.
    """
    p, c = (M.p, M.c) if isinstance(M, TabularModel) else M
    p2, c2 = (M_prime.p, M_prime.c) if isinstance(M_prime, TabularModel) else M_prime
    pi = np.asarray(pi, dtype=float)
    pi_prime = np.asarray(pi_prime, dtype=float)
    if q_hat is None:
        q_hat = evaluate_policy(p, c, pi).q
    q_hat = np.asarray(q_hat, dtype=float)
    H, S, _ = q_hat.shape
    s1 = 0
    v_hat = np.zeros((H + 1, S))
    v_hat[:H] = np.einsum("hsa,hsa->hs", q_hat, pi)
    lhs = v_hat[0, s1] - evaluate_policy(p2, c2, pi_prime).v[0, s1]

    occ = compute_occupancy(pi_prime, p2, s1)
    policy_gap = np.einsum("hsa,hsa->hs", q_hat, pi - pi_prime)
    term_a = np.sum(occ.d * policy_gap)
    bellman_resid = q_hat - c2 - np.einsum("hsat,ht->hsa", p2, v_hat[1:])
    term_b = np.sum(occ.w * bellman_resid)
    return abs(lhs - (term_a + term_b))


# ---------------------------------------------------------------------------
# good events
# ---------------------------------------------------------------------------

@dataclass
class GoodEventReport:
    """Per-episode failure flags (episode ``k`` uses statistics of ``1..k-1``)."""

    regime: str
    f_c: np.ndarray
    f_p: np.ndarray
    f_n: np.ndarray
    delta_prime: float
    extra: dict = field(default_factory=dict)

    @property
    def any(self) -> np.ndarray:
        return self.f_c | self.f_p | self.f_n

    @property
    def good(self) -> np.ndarray:
        return ~self.any

    @property
    def counts(self) -> dict:
        return {"F_c": int(self.f_c.sum()), "F_p": int(self.f_p.sum()), "F_N": int(self.f_n.sum()),
                "any": int(self.any.sum())}

    def to_dict(self) -> dict:
        def episodes(mask):
            return (np.flatnonzero(mask) + 1).tolist()
        return {
            "regime": self.regime,
            "delta_prime": self.delta_prime,
            "counts": self.counts,
            "episodes": {"F_c": episodes(self.f_c), "F_p": episodes(self.f_p), "F_N": episodes(self.f_n)},
        }


def _require_rollouts(run: RunResult, snapshots: bool = True) -> None:
    if run.states is None:
        raise ContractViolation("run has no recorded trajectories")
    if snapshots and not run.has_snapshots:
        raise ContractViolation("run was recorded without policy/value snapshots")


def good_event_report(run: RunResult, truth: TabularModel, delta: float, regime: str,
                      schedule: CostSchedule | None = None) -> GoodEventReport:
    """Replay the run's counters and flag concentration failures per episode.

    Stochastic regime (delta' = delta/3): Hoeffding cost deviation, L1
    transition deviation and the visit-count lower bound. Adversarial regime
    (delta' = delta/6): elementwise Bernstein transition deviation, the same
    count bound and, when ``schedule`` is given, the cumulative bias of the
    importance-sampled costs. Pairs with no visits never flag.
    """
    if regime not in ("stochastic", "adversarial"):
        raise ContractViolation(f"unknown regime {regime!r}")
    _require_rollouts(run)
    H, S, A = truth.H, truth.S, truth.A
    K = run.K
    T = K * H
    dp = delta / (3.0 if regime == "stochastic" else 6.0)
    n = np.zeros((H, S, A))
    m = np.zeros((H, S, A, S))
    cost_sum = np.zeros((H, S, A))
    w_sum = np.zeros((H, S, A))
    f_c = np.zeros(K, dtype=bool)
    f_p = np.zeros(K, dtype=bool)
    f_n = np.zeros(K, dtype=bool)
    count_slack = H * math.log(S * A * H / dp)
    hs = np.arange(H)
    if regime == "adversarial" and schedule is not None:
        bias_sum = np.zeros((H, S, A))
        bias_threshold = math.log(S * A * H * K / dp) / (2.0 * run.gamma)
    for k in range(K):
        visited = n > 0
        safe_n = np.maximum(n, 1)
        p_bar = m / safe_n[..., None]
        if regime == "stochastic":
            c_bar = cost_sum / safe_n
            c_rad = np.sqrt(2.0 * math.log(2 * S * A * H * T / dp) / safe_n)
            f_c[k] = np.any(visited & (np.abs(truth.c - c_bar) >= c_rad))
            l1 = np.abs(truth.p - p_bar).sum(axis=-1)
            p_rad = np.sqrt(4.0 * S * math.log(3 * S * A * H * T / dp) / safe_n)
            f_p[k] = np.any(visited & (l1 >= p_rad))
        else:
            eps = bernstein_radii(p_bar, n, S, A, H, K, dp, clip=False)
            f_p[k] = np.any(visited[..., None] & (np.abs(truth.p - p_bar) >= eps))
        f_n[k] = np.any(n <= 0.5 * w_sum - count_slack)

        pi_k = run.policies[k]
        occ = compute_occupancy(pi_k, truth.p, truth.s1)
        if regime == "adversarial" and schedule is not None:
            u = run.u[k]
            ratio = np.divide(occ.d, u, out=np.zeros_like(u), where=u > 0)
            bias_sum += run.c_hat[k] - ratio[..., None] * schedule[k]
            f_c[k] = np.any(bias_sum >= bias_threshold)
        w_sum += occ.w
        s, a = run.states[k, :-1], run.actions[k]
        n[hs, s, a] += 1
        m[hs, s, a, run.states[k, 1:]] += 1
        cost_sum[hs, s, a] += run.costs[k]
    return GoodEventReport(regime, f_c, f_p, f_n, dp)


# ---------------------------------------------------------------------------
# optimism
# ---------------------------------------------------------------------------

def optimism_violations_stochastic(run: RunResult, truth: TabularModel, tol: float = 1e-10) -> np.ndarray:
    """Per-episode count of ``(h, s, a)`` with ``Q^k - c - p V^k_{h+1} > tol``."""
    _require_rollouts(run)
    backup = truth.c[None] + np.einsum("hsat,kht->khsa", truth.p, run.v[:, 1:])
    return np.sum(run.q - backup > tol, axis=(1, 2, 3))


def check_optimism_stochastic(run: RunResult, truth: TabularModel, episodes=None) -> int:
    """Violation count, restricted to the boolean mask ``episodes`` if given."""
    per_episode = optimism_violations_stochastic(run, truth)
    if episodes is not None:
        per_episode = per_episode[np.asarray(episodes, dtype=bool)]
    return int(per_episode.sum())


def optimism_violations_adversarial(run: RunResult, truth: TabularModel, schedule: CostSchedule,
                                    tol: float = 1e-10) -> np.ndarray:
    """Per-episode count of ``(h, s)`` with ``V^k_h(s) > V^{pi_k, p, c_hat}_h(s) + tol``.

    The cost estimate is rebuilt from the schedule, the trajectory and the
    recorded reach bounds rather than read back from the run.
    """
    _require_rollouts(run)
    H = truth.H
    hs = np.arange(H)
    out = np.zeros(run.K, dtype=np.int64)
    for k in range(run.K):
        pi_k = run.policies[k]
        s, a = run.states[k, :-1], run.actions[k]
        c_hat = np.zeros_like(pi_k)
        c_hat[hs, s, a] = schedule[k][hs, s, a] / (run.u[k][hs, s] * pi_k[hs, s, a] + run.gamma)
        v_true = evaluate_policy(truth.p, c_hat, pi_k).v[:H]
        out[k] = np.sum(run.v[k, :H] > v_true + tol)
    return out


def check_optimism_adversarial(run: RunResult, truth: TabularModel, schedule: CostSchedule,
                               episodes=None) -> int:
    per_episode = optimism_violations_adversarial(run, truth, schedule)
    if episodes is not None:
        per_episode = per_episode[np.asarray(episodes, dtype=bool)]
    return int(per_episode.sum())


# ---------------------------------------------------------------------------
# mirror descent
# ---------------------------------------------------------------------------

def check_omd_inequality(q_history, pi_history, comparator, t: float, bound_scale: float | None = None,
                         replay_tol: float = 1e-9) -> float:
    """Slack in the KL mirror-descent regret inequality at one ``(h, s)``.

    Returns ``ln A / t + t/2 * sum_k <pi_k, q_k^2> - sum_k <q_k, pi_k - comparator>``,
    which must be nonnegative. ``pi_history`` must be the exponentiated-gradient
    replay of ``q_history`` from the uniform distribution.
    """
    q_history = np.asarray(q_history, dtype=float).reshape(-1, np.shape(comparator)[-1])
    pi_history = np.asarray(pi_history, dtype=float).reshape(q_history.shape)
    comparator = np.asarray(comparator, dtype=float)
    A = comparator.shape[-1]
    if np.any(q_history < 0):
        raise ContractViolation("losses must be nonnegative")
    if bound_scale is not None and np.any(q_history > bound_scale * (1 + 1e-12)):
        raise ContractViolation("losses exceed the stated range")
    if len(pi_history):
        x = np.full(A, 1.0 / A)
        for k in range(len(pi_history)):
            if np.max(np.abs(pi_history[k] - x)) > replay_tol:
                raise ContractViolation(f"policy history diverges from the mirror-descent replay at k={k}")
            x = x * np.exp(-t * q_history[k])
            x = x / x.sum()
    regret = np.sum(q_history * (pi_history - comparator))
    bound = math.log(A) / t + 0.5 * t * np.sum(pi_history * q_history**2)
    return float(bound - regret)


# ---------------------------------------------------------------------------
# transition minimiser and values
# ---------------------------------------------------------------------------

def grid_min_oracle(p_bar_row, eps_row, v_next, step: float = 0.01) -> float:
    """Minimum of ``<p, v_next>`` over a grid of the box intersected with the simplex."""
    p_bar_row = np.asarray(p_bar_row, dtype=float)
    v_next = np.asarray(v_next, dtype=float)
    lo = np.maximum(p_bar_row - np.asarray(eps_row), 0.0)
    hi = np.minimum(p_bar_row + np.asarray(eps_row), 1.0)
    free = np.flatnonzero(hi - lo > 0)
    if len(free) > 3:
        raise ContractViolation(f"{len(free)} free coordinates; the grid oracle handles at most 3")
    fixed_mass = lo.sum() - lo[free].sum()
    if len(free) == 0:
        return float(lo @ v_next)
    axes = [np.union1d(np.arange(lo[i], hi[i], step), [hi[i]]) for i in free[:-1]]
    last = free[-1]
    best = math.inf
    for combo in itertools.product(*axes):
        rest = 1.0 - fixed_mass - sum(combo)
        if rest < lo[last] - 1e-12 or rest > hi[last] + 1e-12:
            continue
        p = lo.copy()
        p[free[:-1]] = combo
        p[last] = rest
        best = min(best, float(p @ v_next))
    return best


def monte_carlo_value(env, policy, N: int, rng: np.random.Generator) -> tuple[float, float]:
    """Mean and standard error of total episode cost over ``N`` rollouts."""
    if N < 100:
        raise ContractViolation("need at least 100 rollouts")
    totals = np.empty(N)
    for i in range(N):
        totals[i] = sample_episode(env, policy, rng).costs.sum()
    return float(totals.mean()), float(totals.std(ddof=1) / math.sqrt(N))
