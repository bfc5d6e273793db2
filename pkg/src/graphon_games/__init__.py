"""Solvers and experiments for static graphon games and their finite-player analogs."""

from .errors import ConditionViolation, ConfigError, GraphonGameError, NonConvergence
from .function_space import Grid, GridProfile, l2_dist, make_grid, perm_invariant_dist
from .game import GameSpec, builtin_beach, builtin_cities, builtin_cournot, certify
from .graphon import (Constant, CustomKernel, MinMax, NormalizedPowerLaw, PowerLaw, SimpleThreshold, StepMatrix,
                      WattsStrogatz, discretize, operator_norm, sample_graph)
from .equilibrium import closed_form_nash, planner_optimum, price_of_anarchy, solve_nash
from .finite_game import FiniteGame, epsilon_nash_certify, solve_nash_finite

__version__ = "0.1.0"
