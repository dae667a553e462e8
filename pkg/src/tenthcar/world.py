"""Segment-based 2D world, ray-cast LiDAR simulation, and occupancy-grid
file I/O.

Ground truth is a set of line segments so scan tests have closed-form
oracles. The LiDAR model follows the G2 datasheet numbers: ranges outside
[min_range, max_range] and misses become a NaN no-return marker.

Map files pair a binary PGM (P5, maxval 255) with a YAML sidecar holding
resolution, origin and the log-odds clamp; scan logs are JSONL with null
for no-return.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import kernels
from .core import Pose2D

LOGODDS_MIN = -4.0
LOGODDS_MAX = 4.0

NO_RETURN = math.nan  # marker inside LaserScan.ranges


class MapFormatError(ValueError):
    """Map file pair is malformed or internally inconsistent."""


class WorldModel:
    """Immutable set of wall segments plus their bounding box."""

    def __init__(self, segments, bounds=None):
        seg = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
        if not np.isfinite(seg).all():
            raise ValueError("segment coordinates must be finite")
        self.segments = seg
        self.segments.setflags(write=False)
        if bounds is not None:
            self.bounds = tuple(float(b) for b in bounds)
        elif len(seg):
            xs = np.concatenate([seg[:, 0], seg[:, 2]])
            ys = np.concatenate([seg[:, 1], seg[:, 3]])
            self.bounds = (xs.min(), ys.min(), xs.max(), ys.max())
        else:
            self.bounds = (0.0, 0.0, 0.0, 0.0)

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(frozen=True)
class LidarSpec:
    min_range: float
    max_range: float
    scan_freq: float
    range_rate: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not 0 < self.min_range < self.max_range:
            raise ValueError("need 0 < min_range < max_range")
        if self.scan_freq <= 0 or self.range_rate <= 0:
            raise ValueError("frequencies must be positive")
        if self.range_rate / self.scan_freq < 8:
            raise ValueError("fewer than 8 beams per scan")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def g2_spec(scan_freq: float = 10.0, noise_sigma: float = 0.01) -> LidarSpec:
    """Datasheet preset: 0.12-12 m, 5 kHz sample rate, 5-12 Hz scan rate."""
    if not 5.0 <= scan_freq <= 12.0:
        raise ValueError("G2 scan frequency must be within [5, 12] Hz")
    return LidarSpec(0.12, 12.0, scan_freq, 5000.0, noise_sigma)


def beams_per_scan(spec: LidarSpec) -> int:
    """Beams per revolution; the angular increment is 2*pi / result."""
    return int(round(spec.range_rate / spec.scan_freq))


@dataclass(frozen=True)
class LaserScan:
    """One revolution of ranges. angle_start is relative to the scanner
    heading; beam k points at angle_start + k*angle_increment in the
    scanner frame. No-return beams hold NaN."""

    angle_start: float
    angle_increment: float
    ranges: np.ndarray
    stamp: int = 0
    pose_hint: Pose2D | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "ranges", np.asarray(self.ranges, dtype=np.float64)
        )
        self.ranges.setflags(write=False)

    @property
    def count(self) -> int:
        return len(self.ranges)

    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.ranges)

    def beam_angles(self) -> np.ndarray:
        return self.angle_start + self.angle_increment * np.arange(self.count)

    def endpoints_local(self) -> np.ndarray:
        """(N, 2) beam endpoints in the scanner frame, finite beams only."""
        mask = self.finite_mask()
        ang = self.beam_angles()[mask]
        r = self.ranges[mask]
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)


def raycast(world: WorldModel, origin, angle: float) -> float:
    """Distance from origin along angle to the nearest wall; +inf if the
    ray escapes every segment."""
    d = kernels.raycast_segments(
        float(origin[0]),
        float(origin[1]),
        np.array([math.cos(angle)]),
        np.array([math.sin(angle)]),
        world.segments,
    )
    return float(d[0])


def simulate_scan(
    world: WorldModel, pose: Pose2D, spec: LidarSpec, rng_seed: int | None = None
) -> LaserScan:
    """One full revolution from pose: analytic raycasts plus optional
    Gaussian range noise; out-of-range and escaped beams become NaN."""
    if not world.contains(pose.x, pose.y):
        raise ValueError(f"scan pose ({pose.x}, {pose.y}) outside world bounds")
    n = beams_per_scan(spec)
    inc = 2.0 * math.pi / n
    angles = pose.theta + inc * np.arange(n)
    d = kernels.raycast_segments(
        pose.x, pose.y, np.cos(angles), np.sin(angles), world.segments
    )
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        noise = spec.noise_sigma * rng.standard_normal(n)
        hit = np.isfinite(d)
        d = np.where(hit, d + noise, d)
    bad = ~np.isfinite(d) | (d < spec.min_range) | (d > spec.max_range)
    ranges = np.where(bad, NO_RETURN, d)
    return LaserScan(
        angle_start=0.0,
        angle_increment=inc,
        ranges=ranges,
        stamp=0,
        pose_hint=pose,
    )


@dataclass
class OccupancyGrid:
    """Log-odds occupancy map. Cell (ix, iy) covers
    [origin + ix*res, origin + (ix+1)*res) in x, same in y; values clamp
    to [LOGODDS_MIN, LOGODDS_MAX]."""

    resolution: float
    origin: Pose2D
    width: int
    height: int
    cells: np.ndarray = field(default=None)  # (height, width) float64

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell")
        if self.cells is None:
            self.cells = np.zeros((self.height, self.width), dtype=np.float64)
        else:
            self.cells = np.asarray(self.cells, dtype=np.float64)
            if self.cells.shape != (self.height, self.width):
                raise MapFormatError(
                    f"cells shape {self.cells.shape} does not match "
                    f"{self.height}x{self.width}"
                )
            np.clip(self.cells, LOGODDS_MIN, LOGODDS_MAX, out=self.cells)

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        ix = int(math.floor((x - self.origin.x) / self.resolution))
        iy = int(math.floor((y - self.origin.y) / self.resolution))
        return ix, iy

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin.x + (ix + 0.5) * self.resolution,
            self.origin.y + (iy + 0.5) * self.resolution,
        )

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def probability(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.cells))

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            self.resolution, self.origin, self.width, self.height, self.cells.copy()
        )


def _quantize(cells: np.ndarray) -> np.ndarray:
    span = LOGODDS_MAX - LOGODDS_MIN
    q = np.rint((cells - LOGODDS_MIN) / span * 255.0).astype(np.uint8)
    return 255 - q  # occupied cells render dark


def _dequantize(pixels: np.ndarray) -> np.ndarray:
    span = LOGODDS_MAX - LOGODDS_MIN
    q = (255 - pixels.astype(np.float64)) / 255.0
    return LOGODDS_MIN + q * span


def _pgm_paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix != ".pgm":
        p = p.with_suffix(".pgm")
    return p, p.with_suffix(".yaml")


def grid_save(grid: OccupancyGrid, path) -> Path:
    """Write <path>.pgm (P5) and <path>.yaml; returns the PGM path."""
    pgm, meta = _pgm_paths(path)
    pixels = _quantize(grid.cells)
    with open(pgm, "wb") as f:
        f.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    doc = {
        "image": pgm.name,
        "resolution": float(grid.resolution),
        "origin": [float(grid.origin.x), float(grid.origin.y), float(grid.origin.theta)],
        "width": int(grid.width),
        "height": int(grid.height),
        "logodds_clamp": [float(LOGODDS_MIN), float(LOGODDS_MAX)],
    }
    meta.write_text(yaml.safe_dump(doc, sort_keys=False))
    return pgm


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # comments (#...) allowed between them
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise MapFormatError("PGM header truncated")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise MapFormatError(f"not a binary PGM: magic {tokens[0]!r}")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise MapFormatError("non-numeric PGM header field") from None
    if maxval != 255:
        raise MapFormatError(f"unsupported maxval {maxval}")
    i += 1  # single whitespace byte after maxval
    raster = data[i:i + w * h]
    if len(raster) != w * h:
        raise MapFormatError("PGM raster size mismatch")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def grid_load(path) -> OccupancyGrid:
    pgm, meta = _pgm_paths(path)
    if not pgm.exists() or not meta.exists():
        raise FileNotFoundError(f"need both {pgm} and {meta}")
    pixels = _read_pgm(pgm)
    try:
        doc = yaml.safe_load(meta.read_text())
        resolution = float(doc["resolution"])
        ox, oy, oth = (float(v) for v in doc["origin"])
        width, height = int(doc["width"]), int(doc["height"])
    except (KeyError, TypeError, ValueError, yaml.YAMLError) as exc:
        raise MapFormatError(f"malformed metadata {meta}: {exc}") from None
    if pixels.shape != (height, width):
        raise MapFormatError(
            f"metadata says {height}x{width}, PGM is {pixels.shape[0]}x{pixels.shape[1]}"
        )
    return OccupancyGrid(
        resolution, Pose2D(ox, oy, oth), width, height, _dequantize(pixels)
    )


def save_scans(scans, path) -> None:
    """Append-friendly JSONL scan log; NaN ranges become null."""
    with open(path, "w") as f:
        for scan in scans:
            f.write(json.dumps(_scan_record(scan)) + "\n")


def _scan_record(scan: LaserScan) -> dict:
    hint = scan.pose_hint
    return {
        "stamp": int(scan.stamp),
        "pose_hint": None if hint is None else [hint.x, hint.y, hint.theta],
        "angle_start": scan.angle_start,
        "angle_increment": scan.angle_increment,
        "ranges": [r if math.isfinite(r) else None for r in scan.ranges.tolist()],
    }


def load_scans(path) -> list[LaserScan]:
    scans = []
    with open(path) as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                hint = rec["pose_hint"]
                scans.append(
                    LaserScan(
                        angle_start=float(rec["angle_start"]),
                        angle_increment=float(rec["angle_increment"]),
                        ranges=np.array(
                            [NO_RETURN if r is None else float(r) for r in rec["ranges"]]
                        ),
                        stamp=int(rec["stamp"]),
                        pose_hint=None if hint is None else Pose2D(*hint),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise MapFormatError(f"{path}:{line_no}: bad scan record: {exc}") from None
    return scans


def distance_to_segments(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Min Euclidean distance from each (N, 2) point to any segment."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    segments = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
    a = segments[:, 0:2]
    b = segments[:, 2:4]
    ab = b - a  # (M, 2)
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    ap = points[:, None, :] - a[None, :, :]  # (N, M, 2)
    t = np.clip((ap * ab[None, :, :]).sum(axis=2) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2)
    return d.min(axis=1)


def builtin_world(name: str) -> WorldModel:
    """Bundled test environments: 'square4' is a 4x4 m room centered on
    the origin, 'open10' the 10x10 version; 'office' is a 6x4 m room
    with a central island and a wall stub, leaving a rectangular
    corridor loop."""
    if name in ("square4", "open10"):
        h = 2.0 if name == "square4" else 5.0
        return WorldModel(
            [
                (-h, -h, h, -h),
                (h, -h, h, h),
                (h, h, -h, h),
                (-h, h, -h, -h),
            ]
        )
    if name == "office":
        outer = [
            (0.0, 0.0, 6.0, 0.0),
            (6.0, 0.0, 6.0, 4.0),
            (6.0, 4.0, 0.0, 4.0),
            (0.0, 4.0, 0.0, 0.0),
        ]
        island = [
            (2.0, 1.5, 4.0, 1.5),
            (4.0, 1.5, 4.0, 2.5),
            (4.0, 2.5, 2.0, 2.5),
            (2.0, 2.5, 2.0, 1.5),
        ]
        stub = [(0.0, 2.0, 0.5, 2.0)]
        return WorldModel(outer + island + stub)
    raise ValueError(f"unknown builtin world {name!r}")
