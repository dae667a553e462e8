"""Collision avoidance: artificial-potential cost over sampled
constant-input rollouts.

The potential combines a quadratic pull toward the goal with an
inverse-distance push away from obstacle surfaces inside an influence
band d0. plan_step rolls every (v, delta) candidate forward N kinematic
steps, charges the potential plus a control penalty at each step, kills
rollouts that enter an obstacle, and picks the argmin with a strict
deterministic tie-break.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChassisParams, Pose2D
from .vehicle import AckermannCommand, VehicleState, step_kinematics
from .world import LaserScan

MIN_OBSTACLE_RADIUS = 0.05


class InsideObstacleError(ValueError):
    """Query point is on or inside an obstacle surface."""


@dataclass(frozen=True)
class ApfParams:
    k_att: float = 1.0
    k_rep: float = 0.5
    d0: float = 1.0

    def __post_init__(self):
        if self.k_att <= 0 or self.k_rep <= 0 or self.d0 <= 0:
            raise ValueError("APF parameters must be positive")


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")

    def surface_distance(self, px: float, py: float) -> float:
        return math.hypot(px - self.x, py - self.y) - self.radius


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20
    dt: float = 0.05
    speed_candidates: tuple = (0.5, 1.0, 1.5)
    steer_candidates: tuple = (-0.36, -0.24, -0.12, 0.0, 0.12, 0.24, 0.36)
    w_u: float = 0.1
    v_ref: float = 1.0

    def __post_init__(self):
        if self.horizon < 1 or self.dt <= 0:
            raise ValueError("need horizon >= 1 and dt > 0")
        if not self.speed_candidates or not self.steer_candidates:
            raise ValueError("candidate sets must be nonempty")


def default_mpc(params: ChassisParams, steer_count: int = 7) -> MpcConfig:
    """Candidate grid spanning the chassis steering range."""
    steer = tuple(np.linspace(-params.max_steer, params.max_steer, steer_count))
    return MpcConfig(steer_candidates=steer)


def _repulsive(d: float, params: ApfParams) -> float:
    if d >= params.d0:
        return 0.0
    gap = 1.0 / d - 1.0 / params.d0
    return 0.5 * params.k_rep * gap * gap


def apf_potential(p, goal, obstacles, params: ApfParams) -> float:
    px, py = float(p[0]), float(p[1])
    dx, dy = px - float(goal[0]), py - float(goal[1])
    total = 0.5 * params.k_att * (dx * dx + dy * dy)
    for obs in obstacles:
        d = obs.surface_distance(px, py)
        if d <= 0:
            raise InsideObstacleError(f"point inside obstacle at ({obs.x}, {obs.y})")
        total += _repulsive(d, params)
    return total


def apf_gradient(p, goal, obstacles, params: ApfParams) -> np.ndarray:
    px, py = float(p[0]), float(p[1])
    grad = params.k_att * np.array([px - float(goal[0]), py - float(goal[1])])
    for obs in obstacles:
        rx, ry = px - obs.x, py - obs.y
        center_dist = math.hypot(rx, ry)
        d = center_dist - obs.radius
        if d <= 0:
            raise InsideObstacleError(f"point inside obstacle at ({obs.x}, {obs.y})")
        if d < params.d0:
            # d(U_rep)/dd = -k_rep*(1/d - 1/d0)/d^2, along the unit
            # vector away from the obstacle center
            coeff = -params.k_rep * (1.0 / d - 1.0 / params.d0) / (d * d)
            grad += coeff * np.array([rx, ry]) / center_dist
    return grad


def _circle_from(p, q=None, r=None):
    if q is None:
        return (p[0], p[1], 0.0)
    if r is None:
        cx, cy = 0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])
        return (cx, cy, math.hypot(p[0] - cx, p[1] - cy))
    ax, ay = p
    bx, by = q
    cx, cy = r
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-12:
        # collinear: widest pair as diameter
        pairs = [(p, q), (p, r), (q, r)]
        far = max(pairs, key=lambda ab: math.dist(ab[0], ab[1]))
        return _circle_from(far[0], far[1])
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    return (ux, uy, math.hypot(ax - ux, ay - uy))


def _in_circle(c, p, eps=1e-9) -> bool:
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] + eps


def _min_enclosing_circle(points) -> tuple:
    """Welzl's randomized incremental construction, move-to-front form."""
    pts = [tuple(p) for p in points]
    c = _circle_from(pts[0])
    for i in range(1, len(pts)):
        if _in_circle(c, pts[i]):
            continue
        c = _circle_from(pts[i])
        for j in range(i):
            if _in_circle(c, pts[j]):
                continue
            c = _circle_from(pts[i], pts[j])
            for k in range(j):
                if not _in_circle(c, pts[k]):
                    c = _circle_from(pts[i], pts[j], pts[k])
    return c


def extract_obstacles(
    scan: LaserScan, pose: Pose2D, cluster_eps: float = 0.3
) -> list[Obstacle]:
    """World-frame beam endpoints, single-linkage clustered at
    cluster_eps, each cluster wrapped in its minimal enclosing circle
    (radius floored at MIN_OBSTACLE_RADIUS)."""
    pts = scan.endpoints_local()
    if len(pts) == 0:
        return []
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    world = np.stack(
        [
            pose.x + c * pts[:, 0] - s * pts[:, 1],
            pose.y + s * pts[:, 0] + c * pts[:, 1],
        ],
        axis=1,
    )
    n = len(world)
    # single linkage via union-find over all pairs within eps
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    diff = world[:, None, :] - world[None, :, :]
    close = (diff * diff).sum(axis=2) <= cluster_eps * cluster_eps
    for i in range(n):
        for j in np.nonzero(close[i, i + 1:])[0]:
            ra, rb = find(i), find(int(j) + i + 1)
            if ra != rb:
                parent[rb] = ra

    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)

    obstacles = []
    for members in clusters.values():
        cx, cy, r = _min_enclosing_circle(world[members])
        obstacles.append(Obstacle(cx, cy, max(r, MIN_OBSTACLE_RADIUS)))
    return obstacles


@dataclass(frozen=True)
class PlanResult:
    command: AckermannCommand
    cost: float
    feasible: bool


def plan_step(
    state: VehicleState,
    goal,
    obstacles,
    cfg: MpcConfig,
    apf: ApfParams,
    params: ChassisParams,
) -> PlanResult:
    """Pick the constant (v, delta) whose N-step rollout minimizes the
    accumulated potential plus control penalty; rollouts that touch an
    obstacle cost infinity. Ties break on smallest |delta|, then
    |v - v_ref|, then the signed values, so the result is a strict total
    order independent of evaluation order. When every candidate is
    infeasible the result is a flagged full brake."""
    for obs in obstacles:
        if obs.surface_distance(state.pose.x, state.pose.y) <= 0:
            raise InsideObstacleError("vehicle is inside an obstacle")

    gx, gy = float(goal[0]), float(goal[1])
    best = None
    for v in cfg.speed_candidates:
        for delta in cfg.steer_candidates:
            cost = _rollout_cost(state.pose, v, delta, (gx, gy), obstacles, cfg, apf, params)
            key = (cost, abs(delta), abs(v - cfg.v_ref), delta, v)
            if best is None or key < best[0]:
                best = (key, v, delta)

    cost = best[0][0]
    if math.isinf(cost):
        return PlanResult(AckermannCommand(0.0, 0.0), math.inf, False)
    return PlanResult(AckermannCommand(best[1], best[2]), cost, True)


def _rollout_cost(pose, v, delta, goal, obstacles, cfg, apf, params) -> float:
    state = VehicleState(pose, v, delta)
    stage = cfg.w_u * (delta * delta + (v - cfg.v_ref) ** 2)
    total = 0.0
    for _ in range(cfg.horizon):
        state = step_kinematics(state, cfg.dt, params)
        try:
            total += apf_potential(
                (state.pose.x, state.pose.y), goal, obstacles, apf
            )
        except InsideObstacleError:
            return math.inf
        total += stage
    return total
