"""Experiment orchestration: regret curves, slope fits, multi-seed runs and file output."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import AlgoConfig, RunResult, run_pomd_adversarial, run_pomd_known, run_pomd_stochastic
from .environments import (SCHEDULE_KINDS, CostSchedule, StochasticEnv, make_adversarial_schedule,
                           make_chain_mdp, make_random_mdp, make_rng)
from .mdp_core import ContractViolation, TabularModel, compute_occupancy, optimal_values
from . import oracles

ALGORITHMS = ("known", "stochastic", "adversarial")
ENV_KINDS = ("random", "chain", "file")
CSV_COLUMNS = ["episode", "instant_regret", "cum_regret", "good_event_violation", "optimism_violation"]


class ConfigError(ContractViolation):
    """Invalid experiment configuration; the message lists the offending fields."""


def _fmt(x) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# regret
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RegretCurve:
    instant: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def from_instant(cls, instant) -> "RegretCurve":
        instant = np.asarray(instant, dtype=float)
        return cls(instant, np.cumsum(instant))

    @property
    def K(self) -> int:
        return len(self.instant)

    def at(self, k: int) -> float:
        """Cumulative regret after ``k`` episodes (1-based)."""
        return float(self.cumulative[k - 1])


def regret_stochastic(run: RunResult, model: TabularModel) -> RegretCurve:
    """Exact per-episode gap ``V^{pi_k}(s1) - V^*(s1)``."""
    v_star = optimal_values(model)[1].v[0, model.s1]
    return RegretCurve.from_instant(run.true_values - v_star)


def _prefix_optimal_values(p: np.ndarray, mean_costs: np.ndarray, s1: int) -> np.ndarray:
    """Optimal start values for a batch of cost tables sharing the kernel ``p``."""
    H, S = p.shape[0], p.shape[1]
    v = np.zeros((len(mean_costs), S))
    for h in range(H - 1, -1, -1):
        v = (mean_costs[:, h] + np.einsum("sat,nt->nsa", p[h], v)).min(axis=-1)
    return v[:, s1]


def best_in_hindsight_totals(model: TabularModel, schedule: CostSchedule, K: int | None = None,
                             chunk: int = 2048) -> np.ndarray:
    """``min_pi sum_{k <= K'} V^{k, pi}(s1)`` for every prefix ``K' = 1..K``.

    Values are linear in the cost table for a fixed kernel and policy, so the
    best fixed policy over a prefix is optimal for the prefix's mean costs.
    """
    K = schedule.K if K is None else K
    out = np.empty(K)
    running = np.zeros(model.c.shape)
    for start in range(0, K, chunk):
        stop = min(start + chunk, K)
        block = np.stack([schedule[k] for k in range(start, stop)])
        sums = running + np.cumsum(block, axis=0)
        running = sums[-1]
        counts = np.arange(start + 1, stop + 1)
        out[start:stop] = counts * _prefix_optimal_values(model.p, sums / counts[:, None, None, None], model.s1)
    return out


def regret_adversarial(run: RunResult, model: TabularModel, schedule: CostSchedule) -> RegretCurve:
    """Regret against the best fixed policy of each prefix.

    ``r_k`` is the increment of the prefix regret, so it may be negative when
    the hindsight comparator changes between prefixes.
    """
    learner = np.cumsum(run.true_values)
    prefix_regret = learner - best_in_hindsight_totals(model, schedule, run.K)
    return RegretCurve.from_instant(np.diff(prefix_regret, prepend=0.0))


def fit_loglog(points) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``ln R`` against ``ln K``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ContractViolation("need at least two (K, R) points")
    ks, rs = pts[:, 0], pts[:, 1]
    if np.any(np.diff(ks) <= 0):
        raise ContractViolation("K values must be strictly increasing")
    if np.any(rs <= 0) or np.any(ks <= 0):
        raise ContractViolation("log-log fit needs positive K and R")
    slope, intercept = np.polyfit(np.log(ks), np.log(rs), 1)
    return float(slope), float(intercept)


def fit_loglog_slope(points) -> float:
    return fit_loglog(points)[0]


def checkpoints(K: int, burn_in: int = 100) -> list[int]:
    """Log-spaced ``K/16 .. K`` checkpoints with the burn-in prefix dropped."""
    pts = sorted({K // d for d in (16, 8, 4, 2, 1)})
    return [k for k in pts if k >= burn_in]


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    ``env`` holds ``kind`` (random, chain or file) plus its parameters:
    ``S, A, H, seed`` for random, ``N, H, slip`` for chain, ``path`` for a
    model JSON. ``schedule`` is used by the adversarial algorithm only and is
    always generated from the environment seed, so every run seed faces the
    same adversary.
    """

    env: dict
    algorithm: str
    K: int
    seeds: list
    output: str = "runs/experiment"
    delta: float = 0.1
    t_K: float | None = None
    gamma: float | None = None
    schedule: dict = field(default_factory=lambda: {"kind": "switching"})
    noise: str = "bernoulli"
    good_events: bool = False
    snapshots: bool = False

    def __post_init__(self):
        bad = []
        env = self.env if isinstance(self.env, dict) else {}
        kind = env.get("kind")
        if kind not in ENV_KINDS:
            bad.append("env.kind")
        elif kind == "random":
            bad += [f"env.{k}" for k in ("S", "A", "H") if not (isinstance(env.get(k), int) and env[k] >= 1)]
        elif kind == "chain":
            bad += [f"env.{k}" for k in ("N", "H") if not (isinstance(env.get(k), int) and env[k] >= 1)]
        elif kind == "file" and not isinstance(env.get("path"), str):
            bad.append("env.path")
        if self.algorithm not in ALGORITHMS:
            bad.append("algorithm")
        if not (isinstance(self.K, int) and self.K >= 1):
            bad.append("K")
        if not (isinstance(self.seeds, list) and self.seeds and all(isinstance(s, int) for s in self.seeds)):
            bad.append("seeds")
        elif len(set(self.seeds)) != len(self.seeds):
            bad.append("seeds")
        if not (isinstance(self.delta, (int, float)) and 0 < self.delta < 1):
            bad.append("delta")
        if self.t_K is not None and not (isinstance(self.t_K, (int, float)) and self.t_K > 0):
            bad.append("t_K")
        if self.gamma is not None and not (isinstance(self.gamma, (int, float)) and 0 < self.gamma < 1):
            bad.append("gamma")
        if not isinstance(self.schedule, dict) or self.schedule.get("kind") not in SCHEDULE_KINDS:
            bad.append("schedule.kind")
        elif self.schedule.get("period") is not None and not (
                isinstance(self.schedule["period"], int) and self.schedule["period"] >= 1):
            bad.append("schedule.period")
        if self.noise not in ("bernoulli", "mean"):
            bad.append("noise")
        if bad:
            raise ConfigError(f"invalid config fields: {', '.join(bad)}")

    @property
    def diagnostics(self) -> bool:
        return self.good_events

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        if "config" in d and isinstance(d["config"], dict):
            d = d["config"]  # a manifest written by run_experiment
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        # missing required keys become None so validation reports them with the rest
        args = {"env": None, "algorithm": None, "K": None, "seeds": None}
        args.update({k: v for k, v in d.items() if k in known})
        try:
            config = cls(**args)
        except ConfigError as e:
            if not unknown:
                raise
            raise ConfigError(f"{e}, {', '.join(unknown)}") from None
        if unknown:
            raise ConfigError(f"invalid config fields: {', '.join(unknown)}")
        return config

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise OSError(f"cannot read config {path}: {e.strerror}") from e
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def algo_config(self, K: int | None = None) -> AlgoConfig:
        return AlgoConfig(K=self.K if K is None else K, delta=self.delta, t_K=self.t_K, gamma=self.gamma,
                          snapshots=self.snapshots or self.good_events)


def build_model(env: dict) -> TabularModel:
    kind = env["kind"]
    if kind == "random":
        return make_random_mdp(env["S"], env["A"], env["H"], env.get("seed", 0))
    if kind == "chain":
        return make_chain_mdp(env["N"], env["H"], env.get("slip", 0.0))
    return TabularModel.load(env["path"])


def build_schedule(config: ExperimentConfig, model: TabularModel, K: int | None = None) -> CostSchedule:
    K = config.K if K is None else K
    return make_adversarial_schedule(model, K, config.schedule["kind"], config.env.get("seed", 0),
                                     period=config.schedule.get("period"))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SeedOutcome:
    seed: int
    run: RunResult
    curve: RegretCurve
    good_event_violation: np.ndarray | None = None
    optimism_violation: np.ndarray | None = None
    u_minus_d_l1: np.ndarray | None = None
    report: dict | None = None


def run_seed(config: ExperimentConfig, seed: int, model: TabularModel | None = None,
             schedule: CostSchedule | None = None) -> SeedOutcome:
    """One seed of ``config``: the run, its regret curve and optional diagnostics."""
    model = build_model(config.env) if model is None else model
    algo = config.algo_config()
    rng = make_rng(seed, "episodes")
    if config.algorithm == "known":
        run = run_pomd_known(model, algo)
        curve = regret_stochastic(run, model)
    elif config.algorithm == "stochastic":
        run = run_pomd_stochastic(StochasticEnv(model, config.noise), algo, rng)
        curve = regret_stochastic(run, model)
    else:
        schedule = build_schedule(config, model) if schedule is None else schedule
        run = run_pomd_adversarial(model, schedule, algo, rng)
        curve = regret_adversarial(run, model, schedule)
    out = SeedOutcome(seed, run, curve)
    if config.good_events and config.algorithm != "known":
        _attach_diagnostics(out, config, model, schedule)
    return out


def _attach_diagnostics(out: SeedOutcome, config, model, schedule) -> None:
    run = out.run
    if config.algorithm == "stochastic":
        ge = oracles.good_event_report(run, model, config.delta, "stochastic")
        opt = oracles.optimism_violations_stochastic(run, model)
    else:
        ge = oracles.good_event_report(run, model, config.delta, "adversarial", schedule)
        opt = oracles.optimism_violations_adversarial(run, model, schedule)
        gap = np.empty(run.K)
        for k in range(run.K):
            gap[k] = np.abs(run.u[k] - compute_occupancy(run.policies[k], model.p, model.s1).d).sum()
        out.u_minus_d_l1 = gap
    out.good_event_violation = ge.any.astype(int)
    out.optimism_violation = (opt > 0).astype(int)
    # optimism needs only the concentration events of the episode itself
    failed = ge.f_p | ge.f_c if config.algorithm == "stochastic" else ge.f_p
    out.report = {
        "seed": out.seed,
        "good_events": ge.to_dict(),
        "optimism": {
            "violations_total": int(opt.sum()),
            "violations_on_good_episodes": int(opt[~failed].sum()),
            "episodes": (np.flatnonzero(opt > 0) + 1).tolist(),
        },
    }


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def write_seed_csv(path: Path, outcome: SeedOutcome, diagnostics: bool) -> None:
    cols = CSV_COLUMNS + (["u_minus_d_l1"] if diagnostics else [])

    def opt(arr, k, fmt=str):
        return "" if arr is None else fmt(arr[k])

    with _open_for_write(path) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        c = outcome.curve
        for k in range(c.K):
            row = [k + 1, _fmt(c.instant[k]), _fmt(c.cumulative[k]),
                   opt(outcome.good_event_violation, k), opt(outcome.optimism_violation, k)]
            if diagnostics:
                row.append(opt(outcome.u_minus_d_l1, k, _fmt))
            w.writerow(row)


def aggregate(curves: dict) -> tuple[np.ndarray, np.ndarray]:
    """Per-episode mean and sample std of cumulative regret across seeds.

    Seeds are stacked in sorted order so the result does not depend on the
    order runs finished in; one seed gives std 0.
    """
    stack = np.stack([curves[s].cumulative for s in sorted(curves)])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if len(stack) > 1 else np.zeros_like(mean)
    return mean, std


def write_aggregate_csv(path: Path, mean: np.ndarray, std: np.ndarray, n_seeds: int) -> None:
    with _open_for_write(path) as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["episode", "mean_cum_regret", "std_cum_regret", "n_seeds"])
        for k in range(len(mean)):
            w.writerow([k + 1, _fmt(mean[k]), _fmt(std[k]), n_seeds])


def write_json(path: Path, obj) -> None:
    with _open_for_write(path) as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    outcomes: dict
    mean_cum_regret: np.ndarray
    std_cum_regret: np.ndarray
    elapsed: float
    output: Path


def run_experiment(config: ExperimentConfig, write: bool = True, keep_runs: bool = False) -> ExperimentResult:
    """Run every seed of ``config`` and write per-seed CSVs, the aggregate and a manifest."""
    start = time.perf_counter()
    out_dir = Path(config.output)
    model = build_model(config.env)
    schedule = build_schedule(config, model) if config.algorithm == "adversarial" else None
    outcomes = {}
    for seed in config.seeds:
        res = run_seed(config, seed, model, schedule)
        if write:
            write_seed_csv(out_dir / f"seed_{seed}.csv", res, config.diagnostics)
        if not keep_runs:
            res.run = None  # trajectories and snapshots can be large
        outcomes[seed] = res
    mean, std = aggregate({s: o.curve for s, o in outcomes.items()})
    elapsed = time.perf_counter() - start
    if write:
        write_aggregate_csv(out_dir / "aggregate.csv", mean, std, len(outcomes))
        write_json(out_dir / "manifest.json", {
            "config": config.to_dict(),
            "version": __version__,
            "elapsed_seconds": elapsed,
            "files": [f"seed_{s}.csv" for s in config.seeds] + ["aggregate.csv"],
        })
    return ExperimentResult(config, outcomes, mean, std, elapsed, out_dir)


def run_sweep(config: ExperimentConfig, k_grid, write: bool = True) -> dict:
    """Repeat the experiment at each ``K`` and fit the log-log slope of final mean regret."""
    k_grid = [int(k) for k in k_grid]
    if len(k_grid) < 2 or any(b <= a for a, b in zip(k_grid, k_grid[1:])):
        raise ConfigError("invalid config fields: k_grid")
    finals = []
    for K in k_grid:
        sub = ExperimentConfig(**{**config.to_dict(), "K": K, "output": str(Path(config.output) / f"K_{K}")})
        finals.append(float(run_experiment(sub, write=write).mean_cum_regret[-1]))
    report = {"k_grid": k_grid, "mean_cum_regret": finals}
    try:
        slope, intercept = fit_loglog(list(zip(k_grid, finals)))
    except ContractViolation:
        slope = intercept = math.nan  # nonpositive regret somewhere on the grid
    report.update(slope=slope, intercept=intercept)
    if write:
        write_json(Path(config.output) / "slope_report.json", report)
    return report


def run_diagnostics(config: ExperimentConfig, write: bool = True) -> dict:
    """Run with good-event and optimism checks on and write a violation report."""
    if config.algorithm == "known":
        raise ConfigError("invalid config fields: algorithm (diagnostics need a learning algorithm)")
    diag_config = ExperimentConfig(**{**config.to_dict(), "good_events": True, "snapshots": True})
    result = run_experiment(diag_config, write=write)
    report = {
        "algorithm": config.algorithm,
        "K": config.K,
        "delta": config.delta,
        "seeds": [result.outcomes[s].report for s in config.seeds],
    }
    report["runs_with_any_flag"] = sum(r["good_events"]["counts"]["any"] > 0 for r in report["seeds"])
    report["optimism_violations_on_good_episodes"] = sum(
        r["optimism"]["violations_on_good_episodes"] for r in report["seeds"])
    if write:
        write_json(Path(config.output) / "diag_report.json", report)
    return report
