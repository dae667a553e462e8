"""Deterministic scenario runner.

One fixed-step loop owns every node; per tick the order is sensor →
slam → planner → vehicle, all traffic routed through the bus so queue
and accounting behavior is exercised. Identical (config, seed) produce
identical trajectories; the bus clock is simulation time, not wall
time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import messages
from ..bus import MessageBus
from ..core import Pose2D
from ..planner import Obstacle, plan_step
from ..slam import SlamSystem
from ..vehicle import (
    AckermannCommand,
    VehicleState,
    apply_rate_limits,
    command_to_actuators,
    odometry_from_actuators,
    step_kinematics,
)
from ..world import OccupancyGrid, g2_spec, grid_save, save_scans, simulate_scan
from .bag import Recorder
from .config import ScenarioConfig, load_world

TRACE_HEADER = (
    "t,v_cmd,v_actual,delta_cmd,delta_actual,V_m,phi_s,x,y,theta"
)
SLAM_HEADER = "t,fused_x,fused_y,fused_theta,status"
CYCLES_HEADER = "t,v_cmd,v_actual,delta_cmd,delta_actual,V_m,phi_s"


class MissingTraceError(ValueError):
    """RunLog holds no actuator trace to export."""


@dataclass
class RunLog:
    config: ScenarioConfig
    rows: list = field(default_factory=list)  # TRACE_HEADER tuples
    slam_rows: list = field(default_factory=list)
    scans: list = field(default_factory=list)
    topic_stats: dict = field(default_factory=dict)
    final_true_pose: Pose2D | None = None
    final_fused_pose: Pose2D | None = None
    grid: OccupancyGrid | None = None
    min_clearance: float = math.inf
    goal_reached: bool = False
    plan_infeasible_ticks: int = 0
    artifacts: dict = field(default_factory=dict)


def _rate_ticks(rate_hz: float, sim_dt: float) -> int:
    return max(1, int(round(1.0 / (rate_hz * sim_dt))))


def run_scenario(cfg: ScenarioConfig, out_dir=None, record_path=None) -> RunLog:
    world = load_world(cfg.world)
    spec = g2_spec(cfg.scan_freq, cfg.noise_sigma)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    sim_ns = [0]
    bus = MessageBus(clock=lambda: sim_ns[0])
    sub_cmd = bus.subscribe("cmd", 8)
    sub_scan = bus.subscribe("scan", 4)
    sub_odom = bus.subscribe("odom", 64)
    sub_pose = bus.subscribe("pose", 4)
    recorder = None
    if record_path:
        topics = cfg.record_topics or ("cmd", "scan", "odom", "pose")
        recorder = Recorder(bus, topics, record_path)

    state = VehicleState(Pose2D(*cfg.start_pose), 0.0, 0.0)
    slam_sys = SlamSystem(cfg.slam, Pose2D(*cfg.start_pose)) if "slam" in cfg.tasks else None
    obstacles = [Obstacle(*o) for o in cfg.obstacles]
    mpc_cfg = cfg.mpc_config()
    goal = cfg.goal

    do_scan = "pcm" in cfg.tasks or "slam" in cfg.tasks
    scan_every = _rate_ticks(cfg.scan_freq, cfg.sim_dt)
    odom_every = _rate_ticks(cfg.odom_rate, cfg.sim_dt)
    control_every = _rate_ticks(cfg.control_rate, cfg.sim_dt)
    odom_dt = odom_every * cfg.sim_dt

    log = RunLog(config=cfg)
    n_ticks = int(round(cfg.duration / cfg.sim_dt))
    cmd = AckermannCommand(0.0, 0.0)
    scripted = list(cfg.script)
    script_idx = 0
    latest_pose_est = Pose2D(*cfg.start_pose)
    scan_count = 0

    for tick in range(n_ticks):
        t = tick * cfg.sim_dt
        sim_ns[0] = round(t * 1e9)

        # sensor
        if do_scan and tick % scan_every == 0:
            scan = simulate_scan(
                world, state.pose, spec,
                rng_seed=int(rng.integers(0, 2**63 - 1)),
            )
            scan = replace(scan, stamp=sim_ns[0])
            bus.publish("scan", messages.encode_scan(scan))
            log.scans.append(scan)
            scan_count += 1

        # slam
        if slam_sys is not None:
            for env in sub_odom.pop_all():
                twist, _ = messages.decode_odometry(env.payload)
                slam_sys.step(None, twist, odom_dt)
            for env in sub_scan.pop_all():
                scan_msg = messages.decode_scan(env.payload)
                pose, status = slam_sys.step(scan_msg, None, 0.0)
                bus.publish("pose", messages.encode_pose_status(pose, status))
                log.slam_rows.append(
                    (t, pose.x, pose.y, pose.theta, status)
                )
        for env in sub_pose.pop_all():
            latest_pose_est, _ = messages.decode_pose_status(env.payload)

        # planner
        if "mpc" in cfg.tasks and tick % control_every == 0:
            plan_pose = latest_pose_est if slam_sys is not None else state.pose
            plan_state = VehicleState(plan_pose, state.v, state.delta)
            result = plan_step(
                plan_state, goal, obstacles, mpc_cfg, cfg.apf, cfg.chassis
            )
            if not result.feasible:
                log.plan_infeasible_ticks += 1
            bus.publish("cmd", messages.encode_command(result.command))

        # vehicle
        for env in sub_cmd.pop_all():
            cmd = messages.decode_command(env.payload)
        if "mpc" not in cfg.tasks and "actuator" in cfg.tasks:
            while script_idx < len(scripted) and scripted[script_idx][0] <= t + 1e-12:
                _, sv, sd = scripted[script_idx]
                cmd = AckermannCommand(sv, sd)
                script_idx += 1
        cmd = cmd.clamped(cfg.chassis)
        state = apply_rate_limits(state, cmd, cfg.sim_dt, cfg.chassis)
        state = step_kinematics(state, cfg.sim_dt, cfg.chassis)
        if tick % odom_every == 0:
            motor_now = command_to_actuators(
                AckermannCommand(state.v, state.delta), cfg.calibration
            )
            twist = odometry_from_actuators(
                [motor_now], cfg.calibration, cfg.chassis,
                cfg.odom_sigma_v, cfg.odom_sigma_omega, rng,
            )
            bus.publish("odom", messages.encode_odometry(twist, state.pose))

        motor = command_to_actuators(cmd, cfg.calibration)
        log.rows.append(
            (
                (tick + 1) * cfg.sim_dt,
                cmd.v, state.v, cmd.delta, state.delta,
                motor.V_m, motor.phi_s,
                state.pose.x, state.pose.y, state.pose.theta,
            )
        )

        for obs in obstacles:
            c = obs.surface_distance(state.pose.x, state.pose.y)
            if c < log.min_clearance:
                log.min_clearance = c

        if recorder is not None:
            recorder.drain()

        if goal is not None and math.hypot(
            state.pose.x - goal[0], state.pose.y - goal[1]
        ) < cfg.goal_tolerance:
            log.goal_reached = True
            break

    if recorder is not None:
        recorder.close()

    log.final_true_pose = state.pose
    if slam_sys is not None and log.slam_rows:
        last = log.slam_rows[-1]
        log.final_fused_pose = Pose2D(last[1], last[2], last[3])
        log.grid = slam_sys.map

    for topic, sub in (("cmd", sub_cmd), ("scan", sub_scan),
                       ("odom", sub_odom), ("pose", sub_pose)):
        log.topic_stats[topic] = {
            "published": bus.topic_published(topic),
            "pushed": sub.pushed,
            "dropped": sub.dropped,
            "pending": len(sub),
        }

    if out_dir is not None:
        _write_artifacts(log, Path(out_dir))
    return log


def _fmt(value) -> str:
    return repr(float(value))


def write_trace_csv(rows, path, header=TRACE_HEADER) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
            f.write("\n")
    return path


def _write_artifacts(log: RunLog, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    log.artifacts["trajectory"] = str(
        write_trace_csv(log.rows, out_dir / "trajectory.csv")
    )
    if log.slam_rows:
        log.artifacts["slam"] = str(
            write_trace_csv(log.slam_rows, out_dir / "slam.csv", SLAM_HEADER)
        )
    if log.grid is not None:
        log.artifacts["map"] = str(grid_save(log.grid, out_dir / "map.pgm"))
    if log.scans:
        save_scans(log.scans, out_dir / "scans.jsonl")
        log.artifacts["scans"] = str(out_dir / "scans.jsonl")
    summary = {
        "name": log.config.name,
        "tasks": list(log.config.tasks),
        "seed": log.config.seed,
        "ticks": len(log.rows),
        "topic_stats": log.topic_stats,
        "goal_reached": log.goal_reached,
        "min_clearance": None if math.isinf(log.min_clearance) else log.min_clearance,
        "plan_infeasible_ticks": log.plan_infeasible_ticks,
        "final_true_pose": _pose_list(log.final_true_pose),
        "final_fused_pose": _pose_list(log.final_fused_pose),
        "artifacts": log.artifacts,
    }
    with open(out_dir / "runlog.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    log.artifacts["runlog"] = str(out_dir / "runlog.json")


def _pose_list(pose: Pose2D | None):
    return None if pose is None else [pose.x, pose.y, pose.theta]


def export_cycles(log: RunLog, out_dir) -> Path:
    """Actuator cycle time series (commanded and actual v/delta plus the
    actuator-space command) as one CSV; raises MissingTraceError when the
    log predates any actuator trace."""
    if log.rows is None:
        raise MissingTraceError("run log has no actuator trace")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [r[:7] for r in log.rows]
    return write_trace_csv(rows, out_dir / "cycles.csv", CYCLES_HEADER)


def export_cycles_from_csv(trajectory_csv, out_dir) -> Path:
    """CLI path: re-emit cycles.csv from a previous run's trajectory.csv."""
    src = Path(trajectory_csv)
    if not src.exists():
        raise MissingTraceError(f"no trajectory trace at {src}")
    lines = src.read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise MissingTraceError(f"{src} is not a trajectory trace")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "cycles.csv"
    with open(out, "w", newline="\n") as f:
        f.write(CYCLES_HEADER + "\n")
        for line in lines[1:]:
            f.write(",".join(line.split(",")[:7]) + "\n")
    return out
