"""Software twin of a one-tenth-scale Ackermann research vehicle:
pub/sub middleware, calibrated actuator dynamics, LiDAR simulation,
scan-matching SLAM with EKF fusion, potential-field MPC avoidance, and
a deterministic scenario/profiling harness."""

from .core import (
    ChassisParams,
    Pose2D,
    Twist2D,
    WheelAngles,
    ackermann_wheel_angles,
    default_chassis,
    normalize_angle,
    turning_radius_from_steer,
)
from .vehicle import (
    AckermannCommand,
    ActuatorCalibration,
    DegenerateCalibrationError,
    MotorCommand,
    VehicleState,
    actuators_to_command,
    apply_rate_limits,
    command_to_actuators,
    default_calibration,
    odometry_from_actuators,
    step_kinematics,
)
from .world import (
    LaserScan,
    LidarSpec,
    OccupancyGrid,
    WorldModel,
    beams_per_scan,
    builtin_world,
    distance_to_segments,
    g2_spec,
    grid_load,
    grid_save,
    load_scans,
    raycast,
    save_scans,
    simulate_scan,
)
from .slam import (
    EkfState,
    MultiResGrid,
    ScanMatchResult,
    SlamConfig,
    SlamSystem,
    ekf_predict,
    ekf_update,
    initial_ekf,
    integrate_scan,
    interpolate_map,
    match_scan,
    motion_jacobian,
    slam_step,
)
from .planner import (
    ApfParams,
    MpcConfig,
    Obstacle,
    PlanResult,
    apf_gradient,
    apf_potential,
    default_mpc,
    extract_obstacles,
    plan_step,
)
from .bus import (
    Envelope,
    MessageBus,
    Subscription,
    TransportConfig,
    UdpTransport,
    decode_envelope,
    encode_envelope,
    udp_pump,
)

__version__ = "0.1.0"
