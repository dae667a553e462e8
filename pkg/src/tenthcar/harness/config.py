"""Scenario configuration: YAML loading, validation, bundled presets."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from ..core import ChassisParams, default_chassis
from ..planner import ApfParams, MpcConfig, default_mpc
from ..slam import SlamConfig
from ..vehicle import ActuatorCalibration, default_calibration
from ..world import WorldModel, builtin_world

KNOWN_TASKS = ("actuator", "pcm", "slam", "mpc")


class ConfigError(ValueError):
    pass


class WorldLoadError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    world: str = "square4"
    tasks: tuple[str, ...] = ("actuator",)
    duration: float = 1.0
    sim_dt: float = 0.001
    seed: int = 0
    start_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    goal: tuple[float, float] | None = None
    goal_tolerance: float = 0.1
    obstacles: tuple[tuple[float, float, float], ...] = ()
    script: tuple[tuple[float, float, float], ...] = ()  # (t, v, delta)
    scan_freq: float = 10.0
    noise_sigma: float = 0.01
    odom_rate: float = 100.0
    control_rate: float = 20.0
    odom_sigma_v: float = 0.0
    odom_sigma_omega: float = 0.0
    slam: SlamConfig = field(default_factory=SlamConfig)
    apf: ApfParams = field(default_factory=ApfParams)
    mpc: MpcConfig | None = None
    chassis: ChassisParams = field(default_factory=default_chassis)
    calibration: ActuatorCalibration = field(default_factory=default_calibration)
    record_topics: tuple[str, ...] = ()
    ladder: tuple[tuple[str, ...], ...] = ()
    profile_duration: float = 1.5

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.sim_dt <= 0:
            raise ConfigError("sim_dt must be positive")
        if not self.tasks:
            raise ConfigError("task set must be nonempty")
        for t in self.tasks:
            if t not in KNOWN_TASKS:
                raise ConfigError(f"unknown task {t!r}; valid: {KNOWN_TASKS}")
        if "mpc" in self.tasks and self.goal is None:
            raise ConfigError("mpc task requires a goal")

    def mpc_config(self) -> MpcConfig:
        return self.mpc if self.mpc is not None else default_mpc(self.chassis)


_SCALAR_KEYS = {
    "name": str,
    "world": str,
    "duration": float,
    "sim_dt": float,
    "seed": int,
    "scan_freq": float,
    "noise_sigma": float,
    "odom_rate": float,
    "control_rate": float,
    "odom_sigma_v": float,
    "odom_sigma_omega": float,
    "goal_tolerance": float,
    "profile_duration": float,
}


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a mapping")
    known = set(_SCALAR_KEYS) | {
        "tasks", "start_pose", "goal", "obstacles", "script", "slam", "apf",
        "mpc", "chassis", "calibration", "record_topics", "ladder",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kw = {}
    for key, cast in _SCALAR_KEYS.items():
        if key in doc:
            try:
                kw[key] = cast(doc[key])
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key!r}: {doc[key]!r}") from None
    if "tasks" in doc:
        kw["tasks"] = tuple(str(t) for t in doc["tasks"])
    if "start_pose" in doc:
        kw["start_pose"] = _triple(doc["start_pose"], "start_pose")
    if "goal" in doc and doc["goal"] is not None:
        g = doc["goal"]
        if not isinstance(g, (list, tuple)) or len(g) != 2:
            raise ConfigError("goal must be [x, y]")
        kw["goal"] = (float(g[0]), float(g[1]))
    if "obstacles" in doc:
        kw["obstacles"] = tuple(_triple(o, "obstacle") for o in doc["obstacles"])
    if "script" in doc:
        rows = tuple(_triple(r, "script row") for r in doc["script"])
        if list(rows) != sorted(rows, key=lambda r: r[0]):
            raise ConfigError("script rows must be sorted by time")
        kw["script"] = rows
    if "record_topics" in doc:
        kw["record_topics"] = tuple(str(t) for t in doc["record_topics"])
    if "ladder" in doc:
        kw["ladder"] = tuple(tuple(str(t) for t in row) for row in doc["ladder"])
    try:
        if "slam" in doc:
            kw["slam"] = SlamConfig(**doc["slam"])
        if "apf" in doc:
            kw["apf"] = ApfParams(**doc["apf"])
        if "mpc" in doc:
            m = dict(doc["mpc"])
            for k in ("speed_candidates", "steer_candidates"):
                if k in m:
                    m[k] = tuple(float(v) for v in m[k])
            kw["mpc"] = MpcConfig(**m)
        if "chassis" in doc:
            kw["chassis"] = ChassisParams(**doc["chassis"])
        if "calibration" in doc:
            kw["calibration"] = ActuatorCalibration(**doc["calibration"])
    except TypeError as exc:
        raise ConfigError(f"bad nested section: {exc}") from None
    return ScenarioConfig(**kw)


def _triple(value, what: str) -> tuple[float, float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{what} must be a 3-element list")
    return (float(value[0]), float(value[1]), float(value[2]))


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"no such scenario file: {p}")
    try:
        doc = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    return config_from_dict(doc)


def bundled_scenario(name: str) -> ScenarioConfig:
    ref = resources.files("tenthcar.harness") / "scenarios" / f"{name}.yaml"
    if not ref.is_file():
        raise ConfigError(f"no bundled scenario {name!r}")
    return config_from_dict(yaml.safe_load(ref.read_text()))


def bundled_scenario_names() -> list[str]:
    folder = resources.files("tenthcar.harness") / "scenarios"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def resolve_scenario(ref: str) -> ScenarioConfig:
    """Bundled name first, then filesystem path."""
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return load_config(p)
    return bundled_scenario(ref)


def load_world(ref: str) -> WorldModel:
    """Builtin world name, or a YAML file with a `segments` list."""
    try:
        return builtin_world(ref)
    except ValueError:
        pass
    p = Path(ref)
    if not p.exists():
        raise WorldLoadError(f"world {ref!r} is neither builtin nor a file")
    try:
        doc = yaml.safe_load(p.read_text())
        return WorldModel(doc["segments"])
    except (yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise WorldLoadError(f"cannot load world from {p}: {exc}") from None


def with_overrides(cfg: ScenarioConfig, seed=None, duration=None) -> ScenarioConfig:
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if duration is not None:
        cfg = replace(cfg, duration=float(duration))
    return cfg
