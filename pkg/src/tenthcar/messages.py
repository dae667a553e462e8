"""Payload codecs for the standard topics.

All fixed-width fields are little-endian; floating values are IEEE
doubles. Layouts:

  cmd   "<2d"  v, delta
  odom  "<5d"  v, omega, x, y, theta  (twist plus integrated pose)
  pose  "<3dB" x, y, theta, status (0 ok, 1 tracking-degraded, 2 odom-only)
  scan  "<qddI" stamp_ns, angle_start, angle_increment, count,
        then count doubles (NaN marks no-return)
  map   "<I" metadata byte length, metadata (YAML), then the PGM bytes
"""
from __future__ import annotations

import math
import struct

import numpy as np

from .core import Pose2D, Twist2D
from .vehicle import AckermannCommand
from .world import LaserScan

_CMD = struct.Struct("<2d")
_ODOM = struct.Struct("<5d")
_POSE = struct.Struct("<3dB")
_SCAN_HEAD = struct.Struct("<qddI")

POSE_STATUS = {"ok": 0, "tracking-degraded": 1, "odom-only": 2}
POSE_STATUS_NAMES = {v: k for k, v in POSE_STATUS.items()}


def encode_command(cmd: AckermannCommand) -> bytes:
    return _CMD.pack(cmd.v, cmd.delta)


def decode_command(data: bytes) -> AckermannCommand:
    return AckermannCommand(*_CMD.unpack(data))


def encode_odometry(twist: Twist2D, pose: Pose2D) -> bytes:
    return _ODOM.pack(twist.v, twist.omega, pose.x, pose.y, pose.theta)


def decode_odometry(data: bytes) -> tuple[Twist2D, Pose2D]:
    v, omega, x, y, theta = _ODOM.unpack(data)
    return Twist2D(v, omega), Pose2D(x, y, theta)


def encode_pose_status(pose: Pose2D, status: str) -> bytes:
    return _POSE.pack(pose.x, pose.y, pose.theta, POSE_STATUS[status])


def decode_pose_status(data: bytes) -> tuple[Pose2D, str]:
    x, y, theta, code = _POSE.unpack(data)
    return Pose2D(x, y, theta), POSE_STATUS_NAMES[code]


def encode_scan(scan: LaserScan) -> bytes:
    head = _SCAN_HEAD.pack(
        scan.stamp, scan.angle_start, scan.angle_increment, scan.count
    )
    return head + np.asarray(scan.ranges, dtype="<f8").tobytes()


def decode_scan(data: bytes) -> LaserScan:
    stamp, angle_start, angle_increment, count = _SCAN_HEAD.unpack_from(data, 0)
    body = data[_SCAN_HEAD.size:]
    if len(body) != 8 * count:
        raise ValueError(f"scan payload holds {len(body)} bytes, expected {8 * count}")
    ranges = np.frombuffer(body, dtype="<f8").copy()
    return LaserScan(
        angle_start=angle_start,
        angle_increment=angle_increment,
        ranges=ranges,
        stamp=stamp,
    )


def encode_grid_snapshot(meta: bytes, pgm: bytes) -> bytes:
    return struct.pack("<I", len(meta)) + meta + pgm


def decode_grid_snapshot(data: bytes) -> tuple[bytes, bytes]:
    (meta_len,) = struct.unpack_from("<I", data, 0)
    meta = data[4:4 + meta_len]
    if len(meta) != meta_len:
        raise ValueError("snapshot metadata truncated")
    return meta, data[4 + meta_len:]
