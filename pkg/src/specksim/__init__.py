"""Deterministic desk-scale emulator for swarms of light-speck drones."""

__version__ = "0.1.0"

from .config import ConfigInvalid, ScenarioConfig, load_scenario, scenario_from_dict
from .engine import RunResult, run

__all__ = [
    "ConfigInvalid",
    "RunResult",
    "ScenarioConfig",
    "__version__",
    "load_scenario",
    "run",
    "scenario_from_dict",
]
