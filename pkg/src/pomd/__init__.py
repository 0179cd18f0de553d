"""Policy optimization by mirror descent for tabular finite-horizon MDPs.

Known-model, stochastic-cost and adversarial-cost learners, exact evaluation
tools, brute-force oracles and an experiment harness.
"""

__version__ = "0.1.0"

from .mdp_core import (ContractViolation, OccupancyTables, TabularModel, ValueTables, compute_occupancy,
                       deterministic_policy, evaluate_policy, optimal_values, uniform_policy)
from .environments import (CostSchedule, StochasticEnv, Trajectory, make_adversarial_schedule,
                           make_chain_mdp, make_random_mdp, make_rng, sample_episode)
from .estimation import Counters, EmpiricalModel, empirical_model, importance_sampled_costs, update_counters
from .optimism import bernstein_radii, min_expected_value, reach_upper_bounds, stochastic_bonuses
from .algorithms import (AlgoConfig, RunResult, default_params_adversarial, default_stepsize_stochastic,
                         omd_step, run_pomd_adversarial, run_pomd_known, run_pomd_stochastic)
