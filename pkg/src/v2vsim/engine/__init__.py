"""Deterministic discrete-event engine binding the radio, graph, and data layers."""
from .events import Event, EventKernel
from .scenario import ScenarioConfig, load_scenario, scenario_from_dict, validate_scenario
from .simulation import Simulation, measure_t_prop, run_scenario

__all__ = [
    "Event",
    "EventKernel",
    "ScenarioConfig",
    "Simulation",
    "load_scenario",
    "measure_t_prop",
    "run_scenario",
    "scenario_from_dict",
    "validate_scenario",
]
