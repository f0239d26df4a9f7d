"""Closed-loop simulator: disturbances, sensors, inner loop and the multi-rate runner."""

from gustbench.simulator.attitude import (
    AttitudeGains, attitude_step_response, fit_first_order, identify_attitude_model, inner_attitude_loop,
)
from gustbench.simulator.config import ScenarioConfig, load_scenario, parse_scenario, scenario_names
from gustbench.simulator.disturbances import (
    GroundEffectZone, WeightDropEvent, WindGustField, ground_effect_force, wind_force,
)
from gustbench.simulator.runner import is_due, run_scenario
from gustbench.simulator.sensors import SensorModel
from gustbench.simulator.trace import COLUMNS, SimTrace

__all__ = [
    "AttitudeGains", "attitude_step_response", "fit_first_order", "identify_attitude_model",
    "inner_attitude_loop", "ScenarioConfig", "load_scenario", "parse_scenario", "scenario_names",
    "GroundEffectZone", "WeightDropEvent", "WindGustField", "ground_effect_force", "wind_force",
    "is_due", "run_scenario", "SensorModel", "COLUMNS", "SimTrace",
]
