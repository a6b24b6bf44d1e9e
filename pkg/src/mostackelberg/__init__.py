"""Payoff manipulation in repeated multi-objective Stackelberg games."""

from .belief import FeasibleRegion, accept_probability, sample_region
from .experiments import ExperimentConfig, fixed_game, generate_uniform_game, run_experiment
from .game import Constraint, Game, Manipulation, UtilityKind, UtilityModel, best_response, load_game
from .omp import brute_force_omp, reference_solution, solve_omp
from .policies import PolicySpec, parse_policy
from .simulate import cumulative_regret, run_episode

__all__ = [
    "Constraint", "ExperimentConfig", "FeasibleRegion", "Game", "Manipulation", "PolicySpec",
    "UtilityKind", "UtilityModel", "accept_probability", "best_response", "brute_force_omp",
    "cumulative_regret", "fixed_game", "generate_uniform_game", "load_game", "parse_policy",
    "reference_solution", "run_episode", "run_experiment", "sample_region", "solve_omp",
]
