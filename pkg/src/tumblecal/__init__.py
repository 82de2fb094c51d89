"""tumblecal: multirotor self-calibration from throw-and-catch data.

Estimates the IMU position relative to the center of gravity from
free-tumble sensor logs, identifies steady-state actuator effectiveness
from sequential motor excitation, and computes the optimal moment-free
thrust direction (and the IMU-to-thrust-frame rotation) with a
real-time-capable nullspace/power-iteration solver, cross-checked by a
brute-force reference optimizer and a rigid-body simulator.
"""

from .effectiveness import (
    EffectivenessModel,
    RlsState,
    fit_from_log,
    replay_fit,
    rls_update,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateTorqueModelError,
    HoverInfeasibleError,
    IncompleteExcitationError,
    InsufficientExcitationError,
    NoThrustAuthorityError,
)
from .geometry import (
    EulerYPR,
    euler_to_quat,
    quat_angle_deg,
    quat_canonical,
    quat_conj,
    quat_mul,
    quat_normalize,
    quat_to_euler,
    rotate,
    shortest_rotation,
)
from .imu_offset import (
    ConfidenceEllipsoid,
    FreefallSegment,
    OffsetAccumulator,
    OffsetEstimate,
    accumulate,
    chi2_quantile_3dof,
    confidence_ellipsoid,
    detect_freefall_segments,
    estimate_from_logs,
    solve_ls,
    solve_rls,
)
from .qcqp_oracle import OracleSolution, oracle_eig, oracle_solve
from .rigidbody import (
    AngularState,
    RegressorRow,
    compensate_to_cog,
    differentiate_rates,
    point_acceleration,
    regressor_row,
)
from .sim import (
    Excite,
    GroundTruth,
    Motor,
    MotorPulse,
    Rest,
    SensorLog,
    Throw,
    VehicleConfig,
    hex_excitation_schedule,
    preset_hexarotor,
    preset_quadrotor,
    quad_excitation_schedule,
    simulate,
)
from .thrust_frame import (
    NullspaceBasis,
    ThrustFrameSolution,
    ThrustFrameTracker,
    nullspace_basis,
    power_iteration,
    solve,
    solve_incremental,
)

__version__ = "0.1.0"
