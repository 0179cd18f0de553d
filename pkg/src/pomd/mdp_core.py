"""Exact finite-horizon MDP machinery.

Array conventions used throughout the package (step index ``h`` is 0-based,
so ``h = 0`` is the first step of an episode):

* transitions ``p``: shape ``(H, S, A, S)``, ``p[h, s, a, s']``
* costs ``c``: shape ``(H, S, A)``
* policies: shape ``(H, S, A)``, one action distribution per ``(h, s)``
* state values ``v``: shape ``(H + 1, S)`` with ``v[H] == 0``
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

SIMPLEX_TOL = 1e-12


class ContractViolation(ValueError):
    """Raised when inputs break an operation's preconditions."""


def _check_rows(x: np.ndarray, what: str, tol: float = SIMPLEX_TOL) -> None:
    if np.any(x < 0):
        raise ContractViolation(f"{what} has negative entries")
    err = np.abs(x.sum(axis=-1) - 1.0)
    if np.any(err > tol):
        raise ContractViolation(
            f"{what} rows must sum to 1 (max deviation {err.max():.3e})"
        )


@dataclass(frozen=True, eq=False)
class TabularModel:
    """Transition kernel and mean costs of a finite-horizon MDP."""

    p: np.ndarray
    c: np.ndarray
    s1: int = 0

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=float)
        c = np.ascontiguousarray(self.c, dtype=float)
        if p.ndim != 4 or p.shape[1] != p.shape[3]:
            raise ContractViolation(f"transitions must have shape (H, S, A, S), got {p.shape}")
        if c.shape != p.shape[:3]:
            raise ContractViolation(f"costs shape {c.shape} does not match transitions {p.shape}")
        _check_rows(p, "transitions")
        if np.any(c < 0) or np.any(c > 1):
            raise ContractViolation("mean costs must lie in [0, 1]")
        if not 0 <= self.s1 < p.shape[1]:
            raise ContractViolation(f"initial state {self.s1} out of range")
        p.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s1", int(self.s1))

    @property
    def H(self) -> int:
        return self.p.shape[0]

    @property
    def S(self) -> int:
        return self.p.shape[1]

    @property
    def A(self) -> int:
        return self.p.shape[2]

    @cached_property
    def p_cum(self) -> np.ndarray:
        """Row-wise cumulative transitions with the last entry exactly 1."""
        cum = np.cumsum(self.p, axis=-1)
        return cum / cum[..., -1:]

    def with_costs(self, c) -> "TabularModel":
        return TabularModel(self.p, c, self.s1)

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "A": self.A,
            "H": self.H,
            "s1": self.s1,
            "p": self.p.tolist(),
            "c": self.c.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TabularModel":
        model = cls(np.asarray(d["p"], dtype=float), np.asarray(d["c"], dtype=float), int(d["s1"]))
        if (model.S, model.A, model.H) != (d["S"], d["A"], d["H"]):
            raise ContractViolation("declared S, A, H disagree with table shapes")
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TabularModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class ValueTables:
    q: np.ndarray  # (H, S, A)
    v: np.ndarray  # (H + 1, S), v[H] == 0


@dataclass(frozen=True, eq=False)
class OccupancyTables:
    d: np.ndarray  # (H, S) state occupancy
    w: np.ndarray  # (H, S, A) state-action occupancy


def uniform_policy(H: int, S: int, A: int) -> np.ndarray:
    return np.full((H, S, A), 1.0 / A)


def check_policy(policy, shape=None) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.ndim != 3:
        raise ContractViolation(f"policy must have shape (H, S, A), got {policy.shape}")
    if shape is not None and policy.shape != tuple(shape):
        raise ContractViolation(f"policy shape {policy.shape} does not match {tuple(shape)}")
    _check_rows(policy, "policy")
    return policy


def deterministic_policy(actions, A: int) -> np.ndarray:
    """One-hot policy from an ``(H, S)`` table of action indices."""
    actions = np.asarray(actions, dtype=int)
    return np.eye(A)[actions]


def _backward(p: np.ndarray, c: np.ndarray, policy: np.ndarray) -> ValueTables:
    H, S, A = c.shape
    q = np.empty((H, S, A))
    v = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        q[h] = c[h] + p[h] @ v[h + 1]
        v[h] = np.einsum("sa,sa->s", policy[h], q[h])
    return ValueTables(q, v)


def evaluate_policy(p, c, policy) -> ValueTables:
    """Q and V of ``policy`` by backward recursion.

    ``c`` may be any real-valued cost table of shape ``(H, S, A)``; only the
    transition rows are validated.
    """
    p = np.asarray(p, dtype=float)
    c = np.asarray(c, dtype=float)
    if p.ndim != 4 or c.shape != p.shape[:3] or p.shape[1] != p.shape[3]:
        raise ContractViolation(f"incompatible shapes p={p.shape}, c={c.shape}")
    _check_rows(p, "transitions")
    policy = check_policy(policy, c.shape)
    return _backward(p, c, policy)


def optimal_values(model: TabularModel) -> tuple[np.ndarray, ValueTables]:
    """Optimal deterministic policy (ties to the lowest action) and its values."""
    H, S, A = model.H, model.S, model.A
    q = np.empty((H, S, A))
    v = np.zeros((H + 1, S))
    actions = np.empty((H, S), dtype=int)
    for h in range(H - 1, -1, -1):
        q[h] = model.c[h] + model.p[h] @ v[h + 1]
        actions[h] = np.argmin(q[h], axis=1)  # first minimiser
        v[h] = np.take_along_axis(q[h], actions[h][:, None], axis=1)[:, 0]
    return deterministic_policy(actions, A), ValueTables(q, v)


def compute_occupancy(policy, p, s1: int) -> OccupancyTables:
    policy = np.asarray(policy, dtype=float)
    p = np.asarray(p, dtype=float)
    H, S, _ = policy.shape
    d = np.zeros((H, S))
    d[0, s1] = 1.0
    w = np.empty_like(policy)
    for h in range(H):
        w[h] = d[h][:, None] * policy[h]
        if h + 1 < H:
            d[h + 1] = np.einsum("sa,sat->t", w[h], p[h])
    return OccupancyTables(d, w)
