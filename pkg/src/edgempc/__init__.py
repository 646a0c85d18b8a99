"""Edge-assisted sampling-based model predictive control simulator."""

from .cost import CandidateEvaluator, CostContext, CostWeights, compute_features, discrete_frechet
from .geometry import HighCostRegion, MapWorld, Obstacle, generate_map, line_of_sight
from .harness import ResultsTable, ScenarioConfig, cost_reduction, run_scenario
from .mpc import EdgeMPC, PriorConfig, run_episode
from .network import EdgeNetwork, EdgeNode, deploy_servers, effective_budget, sample_link
from .planner import ReferencePath, RRTStarPlanner, plan_reference, reference_window
from .priors import PriorStore, map_state_to_anchor, mixed_pmf
from .vehicle import MotionPrimitiveLibrary, VehicleState, generate_library, rollout

__version__ = "0.1.0"

__all__ = [
    "CandidateEvaluator", "CostContext", "CostWeights", "EdgeMPC", "EdgeNetwork", "EdgeNode",
    "HighCostRegion", "MapWorld", "MotionPrimitiveLibrary", "Obstacle", "PriorConfig",
    "PriorStore", "RRTStarPlanner", "ReferencePath", "ResultsTable", "ScenarioConfig",
    "VehicleState", "compute_features", "cost_reduction", "deploy_servers", "discrete_frechet",
    "effective_budget", "generate_library", "generate_map", "line_of_sight",
    "map_state_to_anchor", "mixed_pmf", "plan_reference", "reference_window", "rollout",
    "run_episode", "run_scenario", "sample_link",
]
