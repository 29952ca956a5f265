"""Rating protocols that give strategic agents on a network reasons to share information."""

from .dcrs import (DcrsConvergenceError, StrategyTable, check_incentive_feasibility, run_dcrs,
                   solve_subproblem, update_multiplier)
from .engine import BehaviorSpec, best_response_action, simulate
from .growth import GrowthConfig, design_with_refresh, expected_opt_welfare, sweep_refresh
from .protocol import (RatingProtocol, construct_appendix_protocol, design_binary_protocol,
                       feasible_update_bounds, ppe_one_shot_check, rating_transition,
                       stationary_high_fraction, value_functions)
from .tft import TftProfile, best_symmetric_tft, tft_incentive_check, tft_next_action
from .topology import Topology, gen_topology, max_degree
from .utility import UtilityModel, benefit, utility, validate_model
from .welfare import Metrics, poa_threshold_degree, social_welfare, solve_obedient

__version__ = "0.1.0"

__all__ = [
    "BehaviorSpec", "DcrsConvergenceError", "GrowthConfig", "Metrics", "RatingProtocol",
    "StrategyTable", "TftProfile", "Topology", "UtilityModel", "benefit", "best_response_action",
    "best_symmetric_tft", "check_incentive_feasibility", "construct_appendix_protocol",
    "design_binary_protocol", "design_with_refresh", "expected_opt_welfare",
    "feasible_update_bounds", "gen_topology", "max_degree", "poa_threshold_degree",
    "ppe_one_shot_check", "rating_transition", "run_dcrs", "simulate", "social_welfare",
    "solve_obedient", "solve_subproblem", "stationary_high_fraction", "sweep_refresh",
    "tft_incentive_check", "tft_next_action", "update_multiplier", "utility", "validate_model",
    "value_functions",
]
