from .bag import Recorder, iterate_bag, record, replay
from .config import (
    ConfigError,
    ScenarioConfig,
    WorldLoadError,
    bundled_scenario,
    bundled_scenario_names,
    load_config,
    load_world,
    resolve_scenario,
)
from .profiler import TaskProfile, idle_profile, profile_tasks, spin_profile
from .scenario import MissingTraceError, RunLog, export_cycles, run_scenario

__all__ = [
    "ConfigError",
    "MissingTraceError",
    "Recorder",
    "RunLog",
    "ScenarioConfig",
    "TaskProfile",
    "WorldLoadError",
    "bundled_scenario",
    "bundled_scenario_names",
    "export_cycles",
    "idle_profile",
    "iterate_bag",
    "load_config",
    "load_world",
    "profile_tasks",
    "record",
    "replay",
    "resolve_scenario",
    "run_scenario",
    "spin_profile",
]
