"""Persistent capacity of a LEO mega-constellation downlink under handover."""

from .channel import (
    AVERAGE_SHADOWING,
    CapacityTable,
    FadingParams,
    LinkBudget,
    frame_capacity,
    instantaneous_capacity,
    mgf_derivative,
    sample_power,
)
from .circ import CircResult, circ_capacity
from .constellation import (
    ConstellationParams,
    VisibleSet,
    grid_constellation,
    sample_visible_set,
)
from .estimator import (
    CapacityEstimate,
    DinkelbachTrace,
    NonConvergenceError,
    brute_force_optimal,
    db_gain,
    dinkelbach_estimate,
    evaluate_events,
    generate_geometry_events,
    nonpersistent_capacity,
    persistent_capacity_mc,
    q_function,
    rand_capacity_quadrature,
    upper_bound,
)
from .geometry import (
    GroundUser,
    OrbitShell,
    SatelliteInit,
    VisibilityCap,
    central_angle,
    propagate,
    visibility_time,
)
from .handover import MSC, MSC0, OPT, RAND, StrategyKind, decide
from .scenario import PRESETS, Scenario, ScenarioModel, parse_scenario
from .serving import ServeRecord, ServingPolicy, serving_capacity

__all__ = [
    "AVERAGE_SHADOWING",
    "CapacityEstimate",
    "CapacityTable",
    "CircResult",
    "ConstellationParams",
    "DinkelbachTrace",
    "FadingParams",
    "GroundUser",
    "LinkBudget",
    "MSC",
    "MSC0",
    "NonConvergenceError",
    "OPT",
    "OrbitShell",
    "PRESETS",
    "RAND",
    "SatelliteInit",
    "Scenario",
    "ScenarioModel",
    "ServeRecord",
    "ServingPolicy",
    "StrategyKind",
    "VisibilityCap",
    "VisibleSet",
    "brute_force_optimal",
    "central_angle",
    "circ_capacity",
    "db_gain",
    "decide",
    "dinkelbach_estimate",
    "evaluate_events",
    "frame_capacity",
    "generate_geometry_events",
    "grid_constellation",
    "instantaneous_capacity",
    "mgf_derivative",
    "nonpersistent_capacity",
    "parse_scenario",
    "persistent_capacity_mc",
    "propagate",
    "q_function",
    "rand_capacity_quadrature",
    "sample_power",
    "sample_visible_set",
    "serving_capacity",
    "upper_bound",
    "visibility_time",
]

__version__ = "0.1.0"
