"""Scan matching, occupancy integration, and EKF fusion tests."""
import math

import numpy as np
import pytest

from tenthcar import (
    EkfState,
    Pose2D,
    SlamConfig,
    SlamSystem,
    Twist2D,
    builtin_world,
    ekf_predict,
    ekf_update,
    g2_spec,
    initial_ekf,
    match_scan,
    simulate_scan,
    slam_step,
)
from tenthcar.slam import (
    GATE_CHI2_3DOF_99,
    InnovationGateError,
    InsufficientReturnsError,
    MultiResGrid,
    OutOfGridError,
    integrate_scan,
    interpolate_map,
    motion_jacobian,
)
from tenthcar.world import LaserScan, OccupancyGrid
from tenthcar import kernels


def small_cfg(**kw):
    kw.setdefault("map_size", 8.0)
    return SlamConfig(**kw)


# --- multi-resolution pyramid ---

def test_pyramid_shape():
    cfg = small_cfg()
    g = MultiResGrid.create(0.0, 0.0, cfg)
    assert len(g.levels) == cfg.levels
    fine = g.levels[0]
    assert fine.resolution == cfg.resolution
    assert fine.width == math.ceil(cfg.map_size / cfg.resolution)
    for a, b in zip(g.levels, g.levels[1:]):
        assert b.resolution == 2 * a.resolution
        assert b.width == (a.width + 1) // 2
        # shared origin: the pyramid covers one footprint
        assert b.origin == a.origin


def test_pyramid_centered():
    g = MultiResGrid.create(1.0, -2.0, small_cfg())
    fine = g.finest
    cx = fine.origin.x + fine.width * fine.resolution / 2
    cy = fine.origin.y + fine.height * fine.resolution / 2
    assert cx == pytest.approx(1.0, abs=fine.resolution)
    assert cy == pytest.approx(-2.0, abs=fine.resolution)


# --- bilinear interpolation ---

def test_interpolate_constant_grid():
    cells = np.full((10, 10), 2.0)
    g = OccupancyGrid(0.1, Pose2D(0, 0, 0), 10, 10, cells)
    p_expected = 1.0 / (1.0 + math.exp(-2.0))
    val, grad = interpolate_map(g, (0.5, 0.5))
    assert val == pytest.approx(p_expected, rel=1e-12)
    np.testing.assert_allclose(grad, [0.0, 0.0], atol=1e-12)


def test_interpolate_linear_ramp_exact():
    # probability varies linearly along x between two cell columns
    cells = np.zeros((4, 4))
    cells[:, 2] = 4.0
    g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 4, 4, cells)
    p0 = 0.5
    p1 = 1.0 / (1.0 + math.exp(-4.0))
    # halfway between centers of columns 1 (x=1.5) and 2 (x=2.5)
    val, grad = interpolate_map(g, (2.0, 1.5))
    assert val == pytest.approx(0.5 * (p0 + p1), rel=1e-12)
    assert grad[0] == pytest.approx(p1 - p0, rel=1e-12)  # slope per meter
    assert grad[1] == pytest.approx(0.0, abs=1e-12)


def test_interpolate_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    cells = rng.uniform(-4, 4, size=(20, 20))
    g = OccupancyGrid(0.05, Pose2D(0, 0, 0), 20, 20, cells)
    eps = 1e-7
    for _ in range(50):
        x = float(rng.uniform(0.1, 0.9))
        y = float(rng.uniform(0.1, 0.9))
        _, grad = interpolate_map(g, (x, y))
        vx1, _ = interpolate_map(g, (x + eps, y))
        vx0, _ = interpolate_map(g, (x - eps, y))
        vy1, _ = interpolate_map(g, (x, y + eps))
        vy0, _ = interpolate_map(g, (x, y - eps))
        assert grad[0] == pytest.approx((vx1 - vx0) / (2 * eps), abs=1e-5)
        assert grad[1] == pytest.approx((vy1 - vy0) / (2 * eps), abs=1e-5)


def test_interpolate_outside_raises():
    g = OccupancyGrid(0.1, Pose2D(0, 0, 0), 10, 10)
    with pytest.raises(OutOfGridError):
        interpolate_map(g, (5.0, 0.5))
    with pytest.raises(OutOfGridError):
        interpolate_map(g, (0.01, 0.5))  # inside cell 0 but not half a cell in


# --- ray integration ---

def test_bresenham_cell_count():
    # updates along one beam = cells on the line + endpoint mark
    g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 20, 20)
    n = kernels.ray_updates(
        g.cells, 1.0, 0.0, 0.0,
        0.5, 0.5, np.array([10.5]), np.array([5.5]),
        -0.4, 0.9, -4.0, 4.0,
    )
    # line from cell (0,0) to (10,5) visits max(10,5)+1 cells; the last
    # one takes the occupied mark instead of a free update
    assert n == 11
    assert g.cells[5, 10] == pytest.approx(0.9)
    assert g.cells[0, 0] == pytest.approx(-0.4)
    assert (g.cells < 0).sum() == 10


def test_ray_update_clips_at_boundary():
    g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 5, 5)
    kernels.ray_updates(
        g.cells, 1.0, 0.0, 0.0,
        0.5, 0.5, np.array([50.5]), np.array([0.5]),
        -0.4, 0.9, -4.0, 4.0,
    )
    # beam leaves the grid: all crossed cells freed, no endpoint mark
    assert (g.cells[0, :] == -0.4).all()
    assert (g.cells > 0).sum() == 0


def test_integrate_scan_marks_walls():
    world = builtin_world("square4")
    pose = Pose2D(0.0, 0.0, 0.0)
    scan = simulate_scan(world, pose, g2_spec(10.0, 0.0))
    cfg = small_cfg()
    grid = MultiResGrid.create(0.0, 0.0, cfg)
    integrate_scan(grid, pose, scan)
    fine = grid.finest
    # the axis beam hits x = 2.0 exactly, landing in the cell that starts
    # at the wall line
    ix, iy = fine.cell_index(2.001, 0.0)
    assert fine.cells[iy, ix] > 0  # wall cell marked occupied
    ix0, iy0 = fine.cell_index(0.0, 0.0)
    assert fine.cells[iy0, ix0] < 0  # origin carved free


def test_integrate_empty_scan_is_noop():
    cfg = small_cfg()
    grid = MultiResGrid.create(0.0, 0.0, cfg)
    scan = LaserScan(0.0, 0.1, np.full(8, math.nan))
    before = grid.finest.cells.copy()
    integrate_scan(grid, Pose2D(0, 0, 0), scan)
    np.testing.assert_array_equal(grid.finest.cells, before)


# --- scan matching ---

def build_matched_map(world, pose, cfg, n_scans=30, seed0=1000, sigma=0.01):
    spec = g2_spec(10.0, sigma)
    grid = MultiResGrid.create(pose.x, pose.y, cfg)
    for k in range(n_scans):
        integrate_scan(grid, pose, simulate_scan(world, pose, spec, rng_seed=seed0 + k))
    return grid


def test_match_recovers_known_offset():
    world = builtin_world("square4")
    pose = Pose2D(0.3, -0.2, 0.4)
    cfg = small_cfg()
    grid = build_matched_map(world, pose, cfg)
    scan = simulate_scan(world, pose, g2_spec(10.0, 0.01), rng_seed=77)
    init = Pose2D(pose.x + 0.08, pose.y - 0.06, pose.theta + 0.04)
    res = match_scan(grid, scan, init, cfg)
    assert res.converged
    assert res.iterations <= cfg.max_iterations
    assert res.pose.x == pytest.approx(pose.x, abs=0.01)
    assert res.pose.y == pytest.approx(pose.y, abs=0.01)
    assert res.pose.theta == pytest.approx(pose.theta, abs=0.01)
    assert res.covariance is not None and res.covariance.shape == (3, 3)
    assert np.allclose(res.covariance, res.covariance.T)
    assert np.linalg.eigvalsh(res.covariance).min() > 0


def test_match_at_truth_stays_put():
    world = builtin_world("square4")
    pose = Pose2D(0.0, 0.0, 0.0)
    cfg = small_cfg()
    grid = build_matched_map(world, pose, cfg)
    scan = simulate_scan(world, pose, g2_spec(10.0, 0.0))
    res = match_scan(grid, scan, pose, cfg)
    assert res.converged
    # grid quantization shifts the optimum by a fraction of a cell; the
    # match must stay within half a cell of the generating pose
    assert abs(res.pose.x) < 0.025 and abs(res.pose.y) < 0.025
    assert abs(res.pose.theta) < 0.02


def test_match_beam_order_invariant():
    # scoring sums over beams, so a reversed scan lands on the same pose
    world = builtin_world("square4")
    pose = Pose2D(0.2, 0.1, 0.0)
    cfg = small_cfg()
    grid = build_matched_map(world, pose, cfg)
    scan = simulate_scan(world, pose, g2_spec(10.0, 0.0))
    rev = LaserScan(
        angle_start=float(scan.beam_angles()[-1]),
        angle_increment=-scan.angle_increment,
        ranges=scan.ranges[::-1].copy(),
    )
    init = Pose2D(pose.x + 0.05, pose.y + 0.05, pose.theta + 0.02)
    a = match_scan(grid, scan, init, cfg)
    b = match_scan(grid, rev, init, cfg)
    assert a.pose.x == pytest.approx(b.pose.x, abs=1e-6)
    assert a.pose.y == pytest.approx(b.pose.y, abs=1e-6)
    assert a.pose.theta == pytest.approx(b.pose.theta, abs=1e-6)


def test_match_rejects_sparse_scan():
    cfg = small_cfg()
    grid = MultiResGrid.create(0.0, 0.0, cfg)
    scan = LaserScan(0.0, 0.5, np.full(10, math.nan))
    with pytest.raises(InsufficientReturnsError):
        match_scan(grid, scan, Pose2D(0, 0, 0), cfg)


# --- EKF ---

def test_motion_jacobian_matches_finite_differences():
    rng = np.random.default_rng(31)
    for _ in range(100):
        mean = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1.5, 1.5)])
        odom = Twist2D(float(rng.uniform(-5, 5)), float(rng.uniform(-3, 3)))
        dt = float(rng.uniform(0.001, 0.2))
        F = motion_jacobian(mean, odom, dt)

        def f(m):
            return np.array([
                m[0] + odom.v * math.cos(m[2]) * dt,
                m[1] + odom.v * math.sin(m[2]) * dt,
                m[2] + odom.omega * dt,
            ])

        eps = 1e-6
        fd = np.zeros((3, 3))
        for j in range(3):
            dp = np.zeros(3)
            dp[j] = eps
            fd[:, j] = (f(mean + dp) - f(mean - dp)) / (2 * eps)
        np.testing.assert_allclose(F, fd, atol=1e-6)


def test_predict_moves_mean():
    s = initial_ekf(Pose2D(0, 0, 0))
    s = ekf_predict(s, Twist2D(1.0, 0.0), 0.5, np.eye(3) * 1e-4)
    assert s.mean[0] == pytest.approx(0.5)
    assert s.mean[1] == 0.0
    assert s.cov[0, 0] > 1e-6  # noise injected


def test_predict_rejects_bad_dt():
    with pytest.raises(ValueError):
        ekf_predict(initial_ekf(), Twist2D(1, 0), 0.0, np.eye(3))


def test_update_pulls_toward_measurement():
    s = EkfState(np.zeros(3), np.eye(3) * 0.1)
    meas = Pose2D(0.2, -0.1, 0.05)
    out = ekf_update(s, meas, np.eye(3) * 1e-4)
    assert 0 < out.mean[0] <= 0.2
    assert np.trace(out.cov) < np.trace(s.cov)


def test_update_angle_wraparound():
    # innovation crosses the pi boundary without a 2*pi jump
    s = EkfState(np.array([0.0, 0.0, math.pi - 0.05]), np.eye(3) * 0.05)
    out = ekf_update(s, Pose2D(0.0, 0.0, -math.pi + 0.05), np.eye(3) * 0.01)
    # the fused heading stays near pi, not dragged toward zero
    assert abs(out.mean[2]) > 3.0


def test_update_gate_rejects_outliers():
    s = EkfState(np.zeros(3), np.eye(3) * 1e-4)
    with pytest.raises(InnovationGateError):
        ekf_update(s, Pose2D(5.0, 0.0, 0.0), np.eye(3) * 1e-4)


def test_gate_threshold_value():
    assert GATE_CHI2_3DOF_99 == 9.21


def test_covariance_psd_random_walk():
    rng = np.random.default_rng(41)
    s = initial_ekf()
    for _ in range(2000):
        odom = Twist2D(float(rng.uniform(-5, 5)), float(rng.uniform(-3, 3)))
        dt = float(rng.uniform(0.001, 0.1))
        Q = np.diag(rng.uniform(1e-6, 1e-2, 3))
        s = ekf_predict(s, odom, dt, Q)
        if rng.random() < 0.5:
            meas = Pose2D(
                s.mean[0] + rng.normal(0, 0.05),
                s.mean[1] + rng.normal(0, 0.05),
                s.mean[2] + rng.normal(0, 0.02),
            )
            try:
                s = ekf_update(s, meas, np.diag(rng.uniform(1e-4, 1e-2, 3)))
            except InnovationGateError:
                pass
        assert np.allclose(s.cov, s.cov.T, atol=1e-12)
        assert np.linalg.eigvalsh(s.cov).min() > -1e-12


# --- pipeline ---

def test_slam_step_odom_only():
    grid, ekf, pose, status = slam_step(None, initial_ekf(), None, Twist2D(1, 0), 0.1)
    assert status == "odom-only"
    assert grid is None
    assert pose.x == pytest.approx(0.1)


def test_slam_step_bootstraps_map():
    world = builtin_world("square4")
    scan = simulate_scan(world, Pose2D(0, 0, 0), g2_spec(10.0, 0.0))
    cfg = small_cfg()
    grid, ekf, pose, status = slam_step(None, initial_ekf(), scan, None, 0.0, cfg)
    assert status == "ok"
    assert grid is not None
    assert (grid.finest.cells > 0).sum() > 100


def test_slam_step_degraded_leaves_map_untouched():
    world = builtin_world("square4")
    cfg = small_cfg()
    pose = Pose2D(0, 0, 0)
    scan = simulate_scan(world, pose, g2_spec(10.0, 0.0))
    grid, ekf, _, _ = slam_step(None, initial_ekf(), scan, None, 0.0, cfg)
    before = grid.finest.cells.copy()
    # an empty scan cannot match: status degrades, map unchanged
    empty = LaserScan(0.0, 0.1, np.full(64, math.nan))
    grid2, ekf2, _, status = slam_step(grid, ekf, empty, None, 0.0, cfg)
    assert status == "tracking-degraded"
    np.testing.assert_array_equal(grid2.finest.cells, before)


def test_slam_system_tracks_stationary():
    world = builtin_world("square4")
    cfg = small_cfg()
    sys = SlamSystem(cfg, Pose2D(0, 0, 0))
    spec = g2_spec(10.0, 0.01)
    statuses = []
    for k in range(5):
        pose, status = sys.step(simulate_scan(world, Pose2D(0, 0, 0), spec, rng_seed=k), None, 0.0)
        statuses.append(status)
    assert statuses[0] == "ok"
    assert statuses.count("ok") >= 4
    assert abs(pose.x) < 0.02 and abs(pose.y) < 0.02
    assert sys.map is not None
