"""Deterministic finite-volume simulator for two competing chemotactic
species coupled to an incompressible viscous flow in a box."""

from .grid import Grid, ScalarField, FaceField, VelocityField
from .model import ModelParams, SteadyState, steady_states
from .transport import State, PositivityError
from .flow import SolverError, CFLError
from .config import ScenarioConfig, ConfigError, parse_config, load_config, \
    canonical_config, CANONICAL_SCENARIOS
from .run import (RunSummary, RunResult, run_scenario, ode_oracle,
                  uniform_equivalence_test, eps_consistency_sweep,
                  stabilization_experiment)

__version__ = "0.1.0"

__all__ = [
    "Grid", "ScalarField", "FaceField", "VelocityField",
    "ModelParams", "SteadyState", "steady_states",
    "State", "PositivityError", "SolverError", "CFLError",
    "ScenarioConfig", "ConfigError", "parse_config", "load_config",
    "canonical_config", "CANONICAL_SCENARIOS",
    "RunSummary", "RunResult", "run_scenario", "ode_oracle",
    "uniform_equivalence_test", "eps_consistency_sweep",
    "stabilization_experiment",
]
