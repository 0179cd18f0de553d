"""Instance generators, cost schedules and the episode sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp_core import ContractViolation, TabularModel

# disjoint child streams of one run seed
_STREAMS = {"env": 0, "episodes": 1, "schedule": 2}


def make_rng(seed: int, stream: str = "episodes") -> np.random.Generator:
    """Counter-based (Philox) generator for one named stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_STREAMS[stream],))
    return np.random.Generator(np.random.Philox(ss))


def _renormalize(x: np.ndarray) -> np.ndarray:
    x = x / x.sum(axis=-1, keepdims=True)
    # push the residual rounding error into the largest entry
    idx = np.argmax(x, axis=-1)[..., None]
    resid = 1.0 - x.sum(axis=-1, keepdims=True)
    np.put_along_axis(x, idx, np.take_along_axis(x, idx, axis=-1) + resid, axis=-1)
    return x


def make_random_mdp(S: int, A: int, H: int, seed: int) -> TabularModel:
    """Dirichlet(1) transition rows and Uniform[0, 1] mean costs."""
    if S < 2 or A < 1 or H < 1:
        raise ContractViolation(f"need S >= 2, A >= 1, H >= 1 (got S={S}, A={A}, H={H})")
    rng = make_rng(seed, "env")
    p = rng.dirichlet(np.ones(S), size=(H, S, A))
    c = rng.random((H, S, A))
    return TabularModel(_renormalize(p), c, 0)


# chain constants: every step costs STEP_COST except (far end, right), which is
# free, and (start, left), which is the cheaper distractor NEAR_COST
STEP_COST = 1.0
NEAR_COST = 0.75
LEFT, RIGHT = 0, 1


def make_chain_mdp(N: int, H: int, slip: float = 0.0) -> TabularModel:
    """Hard-exploration chain with states ``0..N-1``, starting at state 0.

    ``RIGHT`` moves one state right with probability ``1 - slip`` and left
    otherwise; ``LEFT`` mirrors it. Moves are clamped at both ends. With
    ``slip = 0`` the optimal value from the start is
    ``min(N - 1, NEAR_COST * H)``: walk to the far end (``N - 1`` paid steps,
    free afterwards) or sit at the start paying ``NEAR_COST`` per step.
    """
    if N < 2 or H < N - 1 or not 0.0 <= slip <= 0.5:
        raise ContractViolation(f"need N >= 2, H >= N - 1, slip in [0, 0.5] (got {N}, {H}, {slip})")
    step = np.zeros((N, 2, N))
    for s in range(N):
        left, right = max(s - 1, 0), min(s + 1, N - 1)
        step[s, RIGHT, right] += 1.0 - slip
        step[s, RIGHT, left] += slip
        step[s, LEFT, left] += 1.0 - slip
        step[s, LEFT, right] += slip
    cost = np.full((N, 2), STEP_COST)
    cost[N - 1, RIGHT] = 0.0
    cost[0, LEFT] = NEAR_COST
    return TabularModel(np.broadcast_to(step, (H, N, 2, N)), np.broadcast_to(cost, (H, N, 2)), 0)


@dataclass(frozen=True, eq=False)
class StochasticEnv:
    """A model plus the rule producing realized costs with the model's means.

    ``noise="bernoulli"`` draws costs in {0, 1}; ``noise="mean"`` returns the
    mean cost itself (a deterministic environment).
    """

    model: TabularModel
    noise: str = "bernoulli"

    def __post_init__(self):
        if self.noise not in ("bernoulli", "mean"):
            raise ContractViolation(f"unknown cost noise {self.noise!r}")


SCHEDULE_KINDS = ("constant", "switching", "drifting")


@dataclass(frozen=True, eq=False)
class CostSchedule:
    """Oblivious adversary: cost tables ``c^k`` for episodes ``k = 0..K-1``.

    ``tables`` holds the base tables the rule draws from, or every episode's
    table when ``explicit`` is set (as after loading from JSON).
    """

    kind: str
    K: int
    tables: np.ndarray
    period: int | None = None
    explicit: bool = False

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ContractViolation(f"unknown schedule kind {self.kind!r}")
        t = np.array(self.tables, dtype=float)
        if t.ndim != 4:
            raise ContractViolation("tables must have shape (n, H, S, A)")
        if np.any(t < 0) or np.any(t > 1):
            raise ContractViolation("scheduled costs must lie in [0, 1]")
        if self.explicit and len(t) != self.K:
            raise ContractViolation("explicit schedule needs one table per episode")
        if self.kind == "switching" and not self.explicit and (self.period is None or self.period < 1):
            raise ContractViolation("switching schedule needs period >= 1")
        t.flags.writeable = False
        object.__setattr__(self, "tables", t)

    def cost(self, k: int) -> np.ndarray:
        if not 0 <= k < self.K:
            raise IndexError(k)
        if self.explicit:
            return self.tables[k]
        if self.kind == "constant":
            return self.tables[0]
        if self.kind == "switching":
            return self.tables[(k // self.period) % 2]
        lam = k / (self.K - 1) if self.K > 1 else 0.0
        return (1.0 - lam) * self.tables[0] + lam * self.tables[1]

    __getitem__ = cost

    def __len__(self) -> int:
        return self.K

    def as_array(self) -> np.ndarray:
        return np.stack([self.cost(k) for k in range(self.K)])

    def to_dict(self) -> dict:
        if self.kind == "constant" and not self.explicit:
            return {"kind": "constant", "K": self.K, "costs": [self.tables[0].tolist()], "repeat": True}
        out = {"kind": self.kind, "K": self.K, "costs": self.as_array().tolist()}
        if self.period is not None:
            out["period"] = self.period
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CostSchedule":
        if d.get("repeat"):
            return cls("constant", int(d["K"]), np.asarray(d["costs"], dtype=float)[:1])
        return cls(d["kind"], int(d["K"]), np.asarray(d["costs"], dtype=float), d.get("period"), explicit=True)


def make_adversarial_schedule(model: TabularModel, K: int, kind: str, seed: int,
                              period: int | None = None, second=None) -> CostSchedule:
    """Schedule built from ``model.c`` and a second table.

    The second table is ``second`` when given, otherwise Uniform[0, 1] draws
    from the seed's schedule stream. Switching alternates the two tables every
    ``period`` episodes (default ``K // 4``); drifting interpolates linearly
    from the first to the second.
    """
    if kind not in SCHEDULE_KINDS:
        raise ContractViolation(f"unknown schedule kind {kind!r}")
    if K < 1:
        raise ContractViolation("K must be >= 1")
    first = model.c
    if kind == "constant":
        return CostSchedule("constant", K, first[None])
    if second is None:
        second = make_rng(seed, "schedule").random(first.shape)
    tables = np.stack([first, np.asarray(second, dtype=float)])
    if kind == "switching":
        return CostSchedule("switching", K, tables, period or max(1, K // 4))
    return CostSchedule("drifting", K, tables)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray   # (H + 1,), includes the state reached after step H
    actions: np.ndarray  # (H,)
    costs: np.ndarray    # (H,) realized costs

    def __len__(self) -> int:
        return len(self.actions)


def sample_episode(env, policy: np.ndarray, rng: np.random.Generator) -> Trajectory:
    """Roll out one episode of ``policy``.

    ``env`` is a :class:`StochasticEnv` or a ``(model, costs)`` pair, in which
    case realized costs are read from the ``(H, S, A)`` table ``costs``.
    Consumes exactly ``3 * H`` uniforms from ``rng``.
    """
    if isinstance(env, StochasticEnv):
        model, table, noisy = env.model, env.model.c, env.noise == "bernoulli"
    else:
        model, table = env
        noisy = False
    H, S, A = model.H, model.S, model.A
    pi_cum = np.cumsum(policy, axis=-1)
    pi_cum /= pi_cum[..., -1:]
    p_cum = model.p_cum
    draws = rng.random((H, 3))
    states = np.empty(H + 1, dtype=np.int64)
    actions = np.empty(H, dtype=np.int64)
    costs = np.empty(H)
    s = model.s1
    states[0] = s
    for h in range(H):
        ua, us, uc = draws[h]
        a = min(int(np.searchsorted(pi_cum[h, s], ua, side="right")), A - 1)
        mean = table[h, s, a]
        costs[h] = float(uc < mean) if noisy else mean
        s = min(int(np.searchsorted(p_cum[h, s, a], us, side="right")), S - 1)
        actions[h] = a
        states[h + 1] = s
    return Trajectory(states, actions, costs)
