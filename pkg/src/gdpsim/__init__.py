"""Deterministic protocol engine and scenario simulator for
witness-validated decentralized infrastructure networks."""

__version__ = "0.1.0"

from .config import ScenarioConfig, load_config
from .world import World, build_world, run_world, step

__all__ = ["ScenarioConfig", "World", "build_world", "load_config",
           "run_world", "step", "__version__"]
