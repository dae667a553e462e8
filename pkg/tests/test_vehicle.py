"""Actuator mapping, rate limiting, and kinematic stepping tests."""
import math

import numpy as np
import pytest

from tenthcar import (
    AckermannCommand,
    ActuatorCalibration,
    DegenerateCalibrationError,
    MotorCommand,
    Pose2D,
    VehicleState,
    actuators_to_command,
    apply_rate_limits,
    command_to_actuators,
    default_calibration,
    default_chassis,
    odometry_from_actuators,
    step_kinematics,
)


def test_default_calibration_values():
    cal = default_calibration()
    assert (cal.K_m, cal.m_o, cal.K_s, cal.s_o) == (3500.0, 0.0, 0.9, 0.5)


def test_calibration_rejects_zero_gains():
    with pytest.raises(DegenerateCalibrationError):
        ActuatorCalibration(0.0, 0.0, 0.9, 0.5)
    with pytest.raises(DegenerateCalibrationError):
        ActuatorCalibration(3500.0, 0.0, 0.0, 0.5)


def test_actuator_maps_are_inverse():
    cal = default_calibration()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        cmd = AckermannCommand(float(rng.uniform(-5, 5)), float(rng.uniform(-0.36, 0.36)))
        back = actuators_to_command(command_to_actuators(cmd, cal), cal)
        assert back.v == pytest.approx(cmd.v, rel=1e-12, abs=1e-12)
        assert back.delta == pytest.approx(cmd.delta, rel=1e-12, abs=1e-12)


def test_actuator_map_reference_point():
    # v = 2 m/s -> 7000 RPM; delta = 0.36 rad -> 0.824 servo units
    m = command_to_actuators(AckermannCommand(2.0, 0.36), default_calibration())
    assert m.V_m == pytest.approx(7000.0)
    assert m.phi_s == pytest.approx(0.9 * 0.36 + 0.5)


def test_command_clamping():
    params = default_chassis()
    c = AckermannCommand(9.0, -1.0).clamped(params)
    assert (c.v, c.delta) == (5.0, -0.36)
    c = AckermannCommand(-9.0, 1.0).clamped(params)
    assert (c.v, c.delta) == (-5.0, 0.36)
    inside = AckermannCommand(1.0, 0.1)
    assert inside.clamped(params) == inside


def test_rate_limit_reaches_target_exactly():
    params = default_chassis()
    state = VehicleState(Pose2D(0, 0, 0))
    dt = 1e-3
    cmd = AckermannCommand(5.0, 0.36)
    t = 0.0
    steps_v = steps_d = None
    for i in range(4000):
        state = apply_rate_limits(state, cmd, dt, params)
        t += dt
        if steps_v is None and state.v >= 5.0:
            steps_v = i + 1
        if steps_d is None and state.delta >= 0.36:
            steps_d = i + 1
        if steps_v and steps_d:
            break
    # 5 / 6.67 = 0.74963 s and 0.36 / 5.22 = 0.06897 s, quantized up
    assert steps_v == 750
    assert steps_d == 69
    assert state.v == 5.0 and state.delta == 0.36  # exact arrival, no overshoot


def test_rate_limit_symmetric_deceleration():
    params = default_chassis()
    state = VehicleState(Pose2D(0, 0, 0), v=5.0)
    dt = 1e-3
    cmd = AckermannCommand(-5.0, 0.0)
    n = 0
    while state.v > -5.0:
        state = apply_rate_limits(state, cmd, dt, params)
        n += 1
    assert n == 1500  # 10 / 6.67 = 1.49925 s
    assert state.v == -5.0


def test_rate_limit_rejects_bad_dt():
    with pytest.raises(ValueError):
        apply_rate_limits(VehicleState(Pose2D(0, 0, 0)), AckermannCommand(0, 0), 0.0, default_chassis())


def test_step_zero_speed_is_identity():
    params = default_chassis()
    s0 = VehicleState(Pose2D(1.0, 2.0, 0.5), v=0.0, delta=0.2)
    s1 = step_kinematics(s0, 0.1, params)
    assert s1.pose == s0.pose


def test_step_straight_line_exact():
    params = default_chassis()
    s = VehicleState(Pose2D(0.0, 0.0, 0.0), v=2.0, delta=0.0)
    for _ in range(100):
        s = step_kinematics(s, 0.01, params)
    assert s.pose.x == pytest.approx(2.0, rel=1e-12)
    assert s.pose.y == 0.0
    assert s.pose.theta == 0.0


def test_step_circle_closure():
    # constant steering traces a circle of radius L/tan(delta); after a
    # full period the pose returns to the start
    params = default_chassis()
    delta = 0.3
    v = 1.0
    omega = v * math.tan(delta) / params.wheelbase
    period = 2.0 * math.pi / omega
    n = 2000
    s = VehicleState(Pose2D(0.0, 0.0, 0.0), v=v, delta=delta)
    for _ in range(n):
        s = step_kinematics(s, period / n, params)
    assert s.pose.x == pytest.approx(0.0, abs=1e-6)
    assert s.pose.y == pytest.approx(0.0, abs=1e-6)
    assert abs(s.pose.theta) == pytest.approx(0.0, abs=1e-9) or abs(
        abs(s.pose.theta) - math.pi
    ) < 1e-9


def test_step_matches_exact_arc():
    # one step against the closed-form arc solution
    params = default_chassis()
    v, delta, dt = 1.5, 0.25, 0.05
    omega = v * math.tan(delta) / params.wheelbase
    s = step_kinematics(VehicleState(Pose2D(0, 0, 0), v=v, delta=delta), dt, params)
    r = v / omega
    assert s.pose.x == pytest.approx(r * math.sin(omega * dt), abs=1e-9)
    assert s.pose.y == pytest.approx(r * (1 - math.cos(omega * dt)), abs=1e-9)
    assert s.pose.theta == pytest.approx(omega * dt, rel=1e-12)


def test_odometry_inverts_actuators():
    cal = default_calibration()
    params = default_chassis()
    m = command_to_actuators(AckermannCommand(2.0, 0.1), cal)
    tw = odometry_from_actuators([m], cal, params)
    assert tw.v == pytest.approx(2.0, rel=1e-12)
    assert tw.omega == pytest.approx(2.0 * math.tan(0.1) / params.wheelbase, rel=1e-12)


def test_odometry_uses_latest_sample():
    cal = default_calibration()
    params = default_chassis()
    hist = [
        command_to_actuators(AckermannCommand(1.0, 0.0), cal),
        command_to_actuators(AckermannCommand(3.0, 0.0), cal),
    ]
    assert odometry_from_actuators(hist, cal, params).v == pytest.approx(3.0)


def test_odometry_noise_reproducible():
    cal = default_calibration()
    params = default_chassis()
    m = command_to_actuators(AckermannCommand(2.0, 0.0), cal)
    a = odometry_from_actuators([m], cal, params, sigma_v=0.1, rng=np.random.default_rng(5))
    b = odometry_from_actuators([m], cal, params, sigma_v=0.1, rng=np.random.default_rng(5))
    assert a == b
    assert a.v != 2.0


def test_odometry_requires_history():
    with pytest.raises(ValueError):
        odometry_from_actuators([], default_calibration(), default_chassis())


def test_motor_command_fields():
    m = MotorCommand(7000.0, 0.5)
    assert m.V_m == 7000.0 and m.phi_s == 0.5
