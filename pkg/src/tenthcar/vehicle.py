"""Actuator interface and kinematic motion model.

Commands are (v, delta) pairs mapped to motor RPM / servo position by an
affine calibration; actual speed and steering chase the command under
fixed acceleration and steering-rate limits; motion integrates the
kinematic bicycle equations with a fourth-order fixed-step scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChassisParams, Pose2D, Twist2D


class DegenerateCalibrationError(ValueError):
    """A calibration gain is zero; the actuator map is not invertible."""


@dataclass(frozen=True)
class AckermannCommand:
    """Desired speed (m/s) and equivalent-bicycle steering angle (rad)."""

    v: float
    delta: float

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.delta)):
            raise ValueError("command fields must be finite")

    def clamped(self, params: ChassisParams) -> "AckermannCommand":
        """Saturate to chassis limits; out-of-range values clamp, they
        never reject (ESC behavior)."""
        v = min(params.max_speed, max(params.min_speed, self.v))
        delta = min(params.max_steer, max(-params.max_steer, self.delta))
        return AckermannCommand(v, delta)


@dataclass(frozen=True)
class ActuatorCalibration:
    """Affine maps: V_m = K_m*v + m_o (RPM), phi_s = K_s*delta + s_o."""

    K_m: float
    m_o: float
    K_s: float
    s_o: float

    def __post_init__(self):
        if self.K_m == 0 or self.K_s == 0:
            raise DegenerateCalibrationError("calibration gains must be nonzero")
        for f in (self.K_m, self.m_o, self.K_s, self.s_o):
            if not math.isfinite(f):
                raise ValueError("calibration fields must be finite")


def default_calibration() -> ActuatorCalibration:
    # K_m puts 5 m/s at 17500 RPM, a plausible sensorless-BLDC range;
    # servo midpoint 0.5 with 0.9 units/rad spans the 0.36 rad throw.
    return ActuatorCalibration(K_m=3500.0, m_o=0.0, K_s=0.9, s_o=0.5)


@dataclass(frozen=True)
class MotorCommand:
    """Motor RPM and dimensionless servo position."""

    V_m: float
    phi_s: float

    def __post_init__(self):
        if not (math.isfinite(self.V_m) and math.isfinite(self.phi_s)):
            raise ValueError("motor command fields must be finite")


@dataclass(frozen=True)
class VehicleState:
    pose: Pose2D
    v: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.delta)):
            raise ValueError("state fields must be finite")


def command_to_actuators(cmd: AckermannCommand, cal: ActuatorCalibration) -> MotorCommand:
    return MotorCommand(cal.K_m * cmd.v + cal.m_o, cal.K_s * cmd.delta + cal.s_o)


def actuators_to_command(m: MotorCommand, cal: ActuatorCalibration) -> AckermannCommand:
    if cal.K_m == 0 or cal.K_s == 0:
        raise DegenerateCalibrationError("calibration gains must be nonzero")
    return AckermannCommand((m.V_m - cal.m_o) / cal.K_m, (m.phi_s - cal.s_o) / cal.K_s)


def _move_toward(current: float, target: float, max_step: float) -> float:
    if target > current:
        return min(target, current + max_step)
    return max(target, current - max_step)


def apply_rate_limits(
    state: VehicleState, cmd: AckermannCommand, dt: float, params: ChassisParams
) -> VehicleState:
    """Move actual (v, delta) toward the command by at most
    max_accel*dt / max_steer_rate*dt, arriving exactly when within one
    step. Acceleration and deceleration share the same limit."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cmd = cmd.clamped(params)
    v = _move_toward(state.v, cmd.v, params.max_accel * dt)
    delta = _move_toward(state.delta, cmd.delta, params.max_steer_rate * dt)
    return VehicleState(state.pose, v, delta)


def step_kinematics(state: VehicleState, dt: float, params: ChassisParams) -> VehicleState:
    """Integrate xdot = v cos(theta), ydot = v sin(theta),
    thetadot = v tan(delta)/L over dt with (v, delta) held constant.

    Classic RK4 on the position equations; the heading equation has a
    constant rate so its update is exact.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = state.v
    omega = v * math.tan(state.delta) / params.wheelbase
    th = state.pose.theta

    th2 = th + 0.5 * dt * omega
    th4 = th + dt * omega
    kx = (math.cos(th) + 4.0 * math.cos(th2) + math.cos(th4)) / 6.0
    ky = (math.sin(th) + 4.0 * math.sin(th2) + math.sin(th4)) / 6.0
    pose = Pose2D(
        state.pose.x + dt * v * kx,
        state.pose.y + dt * v * ky,
        th + dt * omega,
    )
    return VehicleState(pose, v, state.delta)


def odometry_from_actuators(
    history,
    cal: ActuatorCalibration,
    params: ChassisParams,
    sigma_v: float = 0.0,
    sigma_omega: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Twist2D:
    """Twist estimate from the most recent motor command: invert the
    affine maps, then omega = v tan(delta)/L. Optional zero-mean
    Gaussian noise with the given sigmas."""
    samples = list(history)
    if not samples:
        raise ValueError("history must contain at least one sample")
    cmd = actuators_to_command(samples[-1], cal)
    v = cmd.v
    omega = v * math.tan(cmd.delta) / params.wheelbase
    if sigma_v > 0 or sigma_omega > 0:
        if rng is None:
            rng = np.random.default_rng()
        if sigma_v > 0:
            v += sigma_v * rng.standard_normal()
        if sigma_omega > 0:
            omega += sigma_omega * rng.standard_normal()
    return Twist2D(v, omega)
