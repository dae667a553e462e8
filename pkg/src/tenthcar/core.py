"""Shared planar geometry types and Ackermann steering relations.

All quantities are SI (meters, radians, seconds). Sign convention:
positive steering angle / turning radius = left (counter-clockwise) turn.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

INCH = 0.0254

__all__ = [
    "Pose2D",
    "Twist2D",
    "ChassisParams",
    "WheelAngles",
    "normalize_angle",
    "default_chassis",
    "ackermann_wheel_angles",
    "turning_radius_from_steer",
]


def normalize_angle(theta: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta}")
    r = math.fmod(theta + math.pi, 2.0 * math.pi)
    if r <= 0.0:
        r += 2.0 * math.pi
    return r - math.pi


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; heading is normalized to (-pi, pi] on construction."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class Twist2D:
    """Longitudinal speed v (m/s) and yaw rate omega (rad/s)."""

    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"twist must be finite, got ({self.v}, {self.omega})")


@dataclass(frozen=True)
class ChassisParams:
    """Geometric and actuator-limit parameters of an Ackermann chassis."""

    wheelbase: float
    track: float
    max_speed: float
    min_speed: float
    max_steer: float
    max_accel: float
    max_steer_rate: float

    def __post_init__(self):
        if self.wheelbase <= 0.0:
            raise ValueError(f"wheelbase must be > 0, got {self.wheelbase}")
        if self.track <= 0.0:
            raise ValueError(f"track must be > 0, got {self.track}")
        if not 0.0 < self.max_steer < math.pi / 2.0:
            raise ValueError(f"max_steer must be in (0, pi/2), got {self.max_steer}")
        if self.max_accel <= 0.0:
            raise ValueError(f"max_accel must be > 0, got {self.max_accel}")
        if self.max_steer_rate <= 0.0:
            raise ValueError(f"max_steer_rate must be > 0, got {self.max_steer_rate}")
        if self.max_speed <= self.min_speed:
            raise ValueError(
                f"max_speed must exceed min_speed, got {self.max_speed} <= {self.min_speed}"
            )


@dataclass(frozen=True)
class WheelAngles:
    """Steering angles of the inside and outside front wheels."""

    inner: float
    outer: float


def default_chassis() -> ChassisParams:
    """Stock chassis: 12.75 in wheelbase, 11.65 in track, +/-5 m/s,
    0.36 rad steering, 6.67 m/s^2 accel, 5.22 rad/s steer rate."""
    return ChassisParams(
        wheelbase=12.75 * INCH,
        track=11.65 * INCH,
        max_speed=5.0,
        min_speed=-5.0,
        max_steer=0.36,
        max_accel=6.67,
        max_steer_rate=5.22,
    )


def ackermann_wheel_angles(params: ChassisParams, radius: float) -> WheelAngles:
    """Inner/outer front wheel angles for a turn of the given signed radius.

    The radius is measured to the rear-axle midpoint; positive turns left.
    Requires |radius| > track/2 so both wheels have a finite turn center.
    """
    half_track = params.track / 2.0
    if abs(radius) <= half_track:
        raise ValueError(
            f"|turning radius| must exceed track/2 = {half_track:.4f} m, got {radius}"
        )
    r = abs(radius)
    inner = math.atan(params.wheelbase / (r - half_track))
    outer = math.atan(params.wheelbase / (r + half_track))
    if radius < 0.0:
        inner, outer = -inner, -outer
    return WheelAngles(inner=inner, outer=outer)


def turning_radius_from_steer(params: ChassisParams, delta: float) -> float | None:
    """Signed turning radius R = L / tan(delta) of the equivalent bicycle.

    Returns None for delta = 0 (straight driving, infinite radius).
    """
    if abs(delta) > params.max_steer:
        raise ValueError(f"|delta| must be <= max_steer {params.max_steer}, got {delta}")
    if delta == 0.0:
        return None
    return params.wheelbase / math.tan(delta)
