"""Scan-matching SLAM with EKF fusion.

The map is a multi-resolution log-odds pyramid. Alignment minimizes
sum_i (1 - M(S_i(xi)))^2 where S_i projects beam endpoint i by the pose
xi and M is the bilinear occupancy interpolant; Gauss-Newton steps run
coarse-to-fine with Levenberg-style damping and a step-halving line
search at the finest level. A 3-state EKF fuses matched poses with wheel
odometry under a chi-square innovation gate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Pose2D, Twist2D, normalize_angle
from .world import LOGODDS_MAX, LOGODDS_MIN, LaserScan, OccupancyGrid

GATE_CHI2_3DOF_99 = 9.21


class OutOfGridError(ValueError):
    pass


class InsufficientReturnsError(ValueError):
    """Scan has too few finite returns to constrain a pose."""


class DegenerateHessianError(np.linalg.LinAlgError):
    """Normal matrix singular even after damping."""


class InnovationGateError(ValueError):
    """Measurement rejected: Mahalanobis distance beyond the 99% gate."""


@dataclass(frozen=True)
class SlamConfig:
    resolution: float = 0.05  # finest level, m/cell
    levels: int = 3
    map_size: float = 12.0  # m, square extent
    l_occ: float = 0.9
    l_free: float = -0.4
    max_iterations: int = 30
    tolerance: float = 1e-4
    min_returns: int = 8
    damping: float = 1e-9  # scaled by trace(H)
    # odometry noise growth per unit time (std dev)
    q_pos: float = 0.05
    q_theta: float = 0.05
    # floor for the scan-match measurement variance; grid quantization
    # scatters matched poses by a few millimeters regardless of fit
    # residual, so an honest lower bound is (0.01)^2 per axis
    r_floor: float = 1e-4

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("need at least one pyramid level")
        if self.resolution <= 0 or self.map_size <= 0:
            raise ValueError("resolution and map_size must be positive")


class MultiResGrid:
    """Pyramid of occupancy grids; level k has resolution r0 * 2**k and
    ceil-halved cell counts, all sharing one origin so every level covers
    at least the base extent."""

    def __init__(self, levels: list[OccupancyGrid]):
        if not levels:
            raise ValueError("need at least one level")
        self.levels = levels

    @classmethod
    def create(cls, center_x: float, center_y: float, cfg: SlamConfig) -> "MultiResGrid":
        n = int(math.ceil(cfg.map_size / cfg.resolution))
        origin = Pose2D(
            center_x - 0.5 * n * cfg.resolution,
            center_y - 0.5 * n * cfg.resolution,
            0.0,
        )
        levels = []
        cells = n
        for k in range(cfg.levels):
            res = cfg.resolution * (2 ** k)
            levels.append(OccupancyGrid(res, origin, cells, cells))
            cells = (cells + 1) // 2
        return cls(levels)

    @property
    def finest(self) -> OccupancyGrid:
        return self.levels[0]


def interpolate_map(grid: OccupancyGrid, point) -> tuple[float, np.ndarray]:
    """Bilinear occupancy probability and its analytic gradient at a
    world point; the point must sit at least half a cell inside."""
    x, y = float(point[0]), float(point[1])
    vals, gx, gy, inside = kernels.bilinear_probe(
        grid.cells,
        grid.resolution,
        grid.origin.x,
        grid.origin.y,
        np.array([x]),
        np.array([y]),
    )
    if not inside[0]:
        raise OutOfGridError(f"point ({x}, {y}) outside grid interior")
    return float(vals[0]), np.array([gx[0], gy[0]])


@dataclass(frozen=True)
class ScanMatchResult:
    pose: Pose2D
    iterations: int
    converged: bool
    final_error: float
    n_points: int = 0
    covariance: np.ndarray | None = None


def _level_sse(grid: OccupancyGrid, ex, ey, xi) -> float:
    _, _, sse, n = kernels.match_accumulate(
        grid.cells, grid.resolution, grid.origin.x, grid.origin.y,
        ex, ey, xi[0], xi[1], xi[2],
    )
    return sse if n else math.inf


def match_scan(
    grid: MultiResGrid,
    scan: LaserScan,
    initial: Pose2D,
    cfg: SlamConfig = SlamConfig(),
) -> ScanMatchResult:
    """Align scan endpoints to the map pyramid starting from `initial`,
    coarse-to-fine. Raises InsufficientReturnsError below cfg.min_returns
    finite beams and DegenerateHessianError when the finest-level normal
    matrix stays singular under damping."""
    pts = scan.endpoints_local()
    if len(pts) < cfg.min_returns:
        raise InsufficientReturnsError(
            f"{len(pts)} finite returns < {cfg.min_returns}"
        )
    ex = np.ascontiguousarray(pts[:, 0])
    ey = np.ascontiguousarray(pts[:, 1])
    xi = np.array([initial.x, initial.y, initial.theta], dtype=np.float64)

    iterations = 0
    converged = False
    sse = math.inf
    n_used = 0
    cov = None

    for level in reversed(grid.levels):
        finest = level is grid.levels[0]
        sse = _level_sse(level, ex, ey, xi)
        for _ in range(cfg.max_iterations):
            hess, b, cur_sse, n_used = kernels.match_accumulate(
                level.cells, level.resolution, level.origin.x, level.origin.y,
                ex, ey, xi[0], xi[1], xi[2],
            )
            if n_used < 3:
                if finest:
                    raise DegenerateHessianError("too few in-map points")
                break
            damped = hess + cfg.damping * np.trace(hess) * np.eye(3)
            try:
                step = np.linalg.solve(damped, b)
            except np.linalg.LinAlgError:
                if finest:
                    raise DegenerateHessianError("singular normal matrix") from None
                break
            if not np.isfinite(step).all():
                if finest:
                    raise DegenerateHessianError("non-finite Gauss-Newton step")
                break

            if finest:
                iterations += 1
                # keep the finest-level objective non-increasing
                accepted = False
                trial = step
                for _ in range(8):
                    new_sse = _level_sse(level, ex, ey, xi + trial)
                    if new_sse <= cur_sse:
                        accepted = True
                        break
                    trial = 0.5 * trial
                if not accepted:
                    converged = float(np.linalg.norm(step)) < cfg.tolerance
                    sse = cur_sse
                    break
                xi = xi + trial
                sse = new_sse
                if float(np.linalg.norm(trial)) < cfg.tolerance:
                    converged = True
                    break
            else:
                xi = xi + step
                if float(np.linalg.norm(step)) < cfg.tolerance:
                    break

    # measurement covariance: residual variance times the normal-matrix
    # inverse at the solution
    hess, _, sse, n_used = kernels.match_accumulate(
        grid.finest.cells, grid.finest.resolution,
        grid.finest.origin.x, grid.finest.origin.y,
        ex, ey, xi[0], xi[1], xi[2],
    )
    if n_used > 3:
        damped = hess + cfg.damping * max(np.trace(hess), 1e-12) * np.eye(3)
        try:
            hinv = np.linalg.inv(damped)
            sigma2 = max(sse / (n_used - 3), cfg.r_floor)
            cov = sigma2 * hinv
            cov = 0.5 * (cov + cov.T) + cfg.r_floor * np.eye(3)
        except np.linalg.LinAlgError:
            cov = None

    pose = Pose2D(xi[0], xi[1], normalize_angle(xi[2]))
    return ScanMatchResult(pose, iterations, converged, sse, n_used, cov)


def integrate_scan(
    grid: MultiResGrid,
    pose: Pose2D,
    scan: LaserScan,
    l_free: float = -0.4,
    l_occ: float = 0.9,
) -> MultiResGrid:
    """Carve free space along each finite beam and mark its endpoint, on
    every pyramid level; out-of-grid portions clip silently."""
    pts = scan.endpoints_local()
    if len(pts) == 0:
        return grid
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    wx = pose.x + c * pts[:, 0] - s * pts[:, 1]
    wy = pose.y + s * pts[:, 0] + c * pts[:, 1]
    for level in grid.levels:
        kernels.ray_updates(
            level.cells, level.resolution, level.origin.x, level.origin.y,
            pose.x, pose.y, wx, wy, l_free, l_occ, LOGODDS_MIN, LOGODDS_MAX,
        )
    return grid


@dataclass(frozen=True)
class EkfState:
    mean: np.ndarray  # (x, y, theta)
    cov: np.ndarray  # 3x3

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        cov = np.asarray(self.cov, dtype=np.float64).reshape(3, 3)
        cov = 0.5 * (cov + cov.T)  # keep symmetric against round-off
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def pose(self) -> Pose2D:
        return Pose2D(self.mean[0], self.mean[1], self.mean[2])


def initial_ekf(pose: Pose2D = Pose2D(0.0, 0.0, 0.0), var: float = 1e-6) -> EkfState:
    return EkfState(np.array([pose.x, pose.y, pose.theta]), var * np.eye(3))


def motion_jacobian(mean: np.ndarray, odom: Twist2D, dt: float) -> np.ndarray:
    """d(next state)/d(state) for the unicycle model: identity except for
    the heading coupling in the position rows."""
    th = mean[2]
    v = odom.v
    return np.array(
        [
            [1.0, 0.0, -v * math.sin(th) * dt],
            [0.0, 1.0, v * math.cos(th) * dt],
            [0.0, 0.0, 1.0],
        ]
    )


def ekf_predict(state: EkfState, odom: Twist2D, dt: float, Q: np.ndarray) -> EkfState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, y, th = state.mean
    v, om = odom.v, odom.omega
    mean = np.array(
        [
            x + v * math.cos(th) * dt,
            y + v * math.sin(th) * dt,
            normalize_angle(th + om * dt),
        ]
    )
    F = motion_jacobian(state.mean, odom, dt)
    cov = F @ state.cov @ F.T + np.asarray(Q, dtype=np.float64)
    return EkfState(mean, cov)


def ekf_update(state: EkfState, measured: Pose2D, R: np.ndarray) -> EkfState:
    """Direct pose measurement (identity model) with angle-aware
    innovation and a Joseph-form covariance update. Raises
    InnovationGateError beyond the 99% chi-square gate."""
    R = np.asarray(R, dtype=np.float64)
    nu = np.array(
        [
            measured.x - state.mean[0],
            measured.y - state.mean[1],
            normalize_angle(measured.theta - state.mean[2]),
        ]
    )
    S = state.cov + R
    try:
        Sinv = np.linalg.inv(S)
    except np.linalg.LinAlgError:
        raise InnovationGateError("innovation covariance singular") from None
    d2 = float(nu @ Sinv @ nu)
    if d2 > GATE_CHI2_3DOF_99:
        raise InnovationGateError(f"Mahalanobis^2 {d2:.2f} > {GATE_CHI2_3DOF_99}")
    K = state.cov @ Sinv
    mean = state.mean + K @ nu
    mean[2] = normalize_angle(mean[2])
    IK = np.eye(3) - K
    cov = IK @ state.cov @ IK.T + K @ R @ K.T
    return EkfState(mean, cov)


def slam_step(
    grid: MultiResGrid | None,
    ekf: EkfState,
    scan: LaserScan | None,
    odom: Twist2D | None,
    dt: float,
    cfg: SlamConfig = SlamConfig(),
):
    """One pipeline tick: predict with odometry, align the scan, fuse the
    matched pose, then integrate the scan into the map at the fused pose.

    Returns (grid, ekf, pose, status) with status one of "ok",
    "odom-only" (no scan this tick) and "tracking-degraded" (match or
    gate failure; the map is left untouched). A None grid bootstraps a
    map centered on the current estimate from the first scan.
    """
    if odom is not None:
        Q = np.diag(
            [cfg.q_pos**2 * dt, cfg.q_pos**2 * dt, cfg.q_theta**2 * dt]
        )
        ekf = ekf_predict(ekf, odom, dt, Q)

    if scan is None:
        return grid, ekf, ekf.pose(), "odom-only"

    if grid is None:
        grid = MultiResGrid.create(ekf.mean[0], ekf.mean[1], cfg)
        integrate_scan(grid, ekf.pose(), scan, cfg.l_free, cfg.l_occ)
        return grid, ekf, ekf.pose(), "ok"

    try:
        result = match_scan(grid, scan, ekf.pose(), cfg)
    except (InsufficientReturnsError, DegenerateHessianError):
        return grid, ekf, ekf.pose(), "tracking-degraded"
    if not result.converged or result.covariance is None:
        return grid, ekf, ekf.pose(), "tracking-degraded"
    try:
        ekf = ekf_update(ekf, result.pose, result.covariance)
    except InnovationGateError:
        return grid, ekf, ekf.pose(), "tracking-degraded"

    integrate_scan(grid, ekf.pose(), scan, cfg.l_free, cfg.l_occ)
    return grid, ekf, ekf.pose(), "ok"


class SlamSystem:
    """Owns the pyramid and filter across ticks; thin wrapper over
    slam_step for bus-driven use."""

    def __init__(self, cfg: SlamConfig = SlamConfig(), initial_pose: Pose2D = Pose2D(0, 0, 0)):
        self.cfg = cfg
        self.grid: MultiResGrid | None = None
        self.ekf = initial_ekf(initial_pose)

    def step(self, scan: LaserScan | None, odom: Twist2D | None, dt: float):
        self.grid, self.ekf, pose, status = slam_step(
            self.grid, self.ekf, scan, odom, dt, self.cfg
        )
        return pose, status

    @property
    def map(self) -> OccupancyGrid | None:
        return self.grid.finest if self.grid is not None else None
