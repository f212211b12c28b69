"""Best responses, mean-field and Nash equilibria for a two-population
relative-performance portfolio game with Brownian and Poisson risk."""

__version__ = "0.1.0"

from .best_response import (BestResponseInput, best_response_partials, g_value, hjb_constant,
                            solve_best_response, value_factor)
from .errors import ConfigError, ConvergenceError, JumpMfgError, SimulationError, SolverError
from .fixedpoint import EquilibriumMeans
from .mfe import (MfeProblem, closed_form_AB, closed_form_mfe_pop1, contraction_epsilon,
                  empirical_lipschitz, mfe_map, solve_mfe)
from .model import (AgentRoster, Marginal, Population, PopulationSpec, TypeSample, TypeVector,
                    sample_population, sample_roster, sample_type_vector)
from .nash import NashProblem, NashSolution, nash_map, solve_nash, verify_nash_by_deviation
from .sim import SimConfig, estimate_relative_utility, simulate_wealth

__all__ = [
    "AgentRoster", "BestResponseInput", "ConfigError", "ConvergenceError", "EquilibriumMeans", "JumpMfgError",
    "Marginal", "MfeProblem", "NashProblem", "NashSolution", "Population", "PopulationSpec", "SimConfig",
    "SimulationError", "SolverError", "TypeSample", "TypeVector", "best_response_partials", "closed_form_AB",
    "closed_form_mfe_pop1", "contraction_epsilon", "empirical_lipschitz", "estimate_relative_utility", "g_value",
    "hjb_constant", "mfe_map", "nash_map", "sample_population", "sample_roster", "sample_type_vector",
    "simulate_wealth", "solve_best_response", "solve_mfe", "solve_nash", "value_factor", "verify_nash_by_deviation",
]
