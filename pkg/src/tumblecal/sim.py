"""6-DOF rigid-body simulator generating synthetic IMU logs for throws,
rests, and motor-excitation sequences.

Frames and signs:
    - World and body frames are z-down; gravity in world coordinates is
      (0, 0, +9.81) m/s^2.
    - Accelerometers report specific force (no gravity). At rest with
      identity attitude the reading is (0, 0, -9.81); in free fall with
      motors off and no IMU offset it is exactly zero.
    - The accelerometer sits at `imu_r` (body coords) away from the CoG and
      so picks up the lever-arm terms w' x r + w x (w x r).
    - `imu_q` rotates body coordinates into IMU coordinates; the log and
      the ground truth (r_true, G1 matrices) are expressed in the IMU
      frame, which is all the estimation pipeline ever sees.

Integration is fixed-step RK4 at the log rate, with the quaternion
re-normalized every step. Sensor samples are synthesized from the exact
state derivative at each sample instant, so the noiseless free-tumble
regressor identity holds to integration precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .geometry import (
    EulerYPR,
    IDENTITY_QUAT,
    euler_to_quat,
    quat_conj,
    quat_mul,
    quat_normalize,
    quat_to_matrix,
    rotate,
)
from .rigidbody import lever_arm_matrices

GRAVITY = 9.81
GRAVITY_W = np.array([0.0, 0.0, GRAVITY])  # z-down world


@dataclass
class Motor:
    position: np.ndarray  # m from CoG, body frame
    axis: np.ndarray  # unit thrust direction, body frame
    force_per_u: float  # N at u = 1
    torque_per_u: float  # N*m drag torque about axis at u = 1, signed by spin

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(self.axis)
        if not 0.99 < n < 1.01:
            raise ValueError("motor axis must be a unit vector")
        self.axis = self.axis / n


@dataclass
class VehicleConfig:
    mass: float  # kg
    inertia: np.ndarray  # kg*m^2, SPD, body frame
    motors: List[Motor]
    imu_r: np.ndarray  # IMU position from CoG, body frame, m
    imu_q: np.ndarray  # body-to-IMU rotation: v_imu = rotate(imu_q, v_body)
    u_min: float = 0.0
    u_max: float = 1.0
    drag_coeff: float = 0.0  # N per m/s of linear drag on the CoG (0 = exact free fall)

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.imu_r = np.asarray(self.imu_r, dtype=float)
        self.imu_q = quat_normalize(self.imu_q)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.inertia.shape != (3, 3) or np.any(np.linalg.eigvalsh(self.inertia) <= 0):
            raise ValueError("inertia must be a 3x3 SPD matrix")

    @property
    def m(self) -> int:
        return len(self.motors)

    def force_columns(self) -> np.ndarray:
        """(3, m) motor force per unit input, body frame, newtons."""
        return np.column_stack([mt.force_per_u * mt.axis for mt in self.motors])

    def torque_columns(self) -> np.ndarray:
        """(3, m) motor torque per unit input, body frame, N*m."""
        return np.column_stack(
            [
                np.cross(mt.position, mt.force_per_u * mt.axis) + mt.torque_per_u * mt.axis
                for mt in self.motors
            ]
        )

    def true_effectiveness(self) -> Tuple[np.ndarray, np.ndarray]:
        """(G1f, G1tau) in the IMU frame: specific force (m/s^2) and
        angular acceleration (rad/s^2) per unit input."""
        R = quat_to_matrix(self.imu_q)
        G1f = R @ (self.force_columns() / self.mass)
        G1tau = R @ np.linalg.solve(self.inertia, self.torque_columns())
        return G1f, G1tau


@dataclass
class Rest:
    duration: float = 1.0


@dataclass
class Throw:
    """Rest, ballistic free tumble with initial spin, catch, rest."""

    omega0_deg: Sequence[float] = (400.0, 400.0, 100.0)
    duration: float = 0.9  # airborne time; ~0.9 s for a 1 m throw-and-catch
    lead_in: float = 0.25
    catch_time: float = 0.2
    tail: float = 0.25


@dataclass
class MotorPulse:
    motor: int
    start: float
    duration: float  # total, including both ramps
    amplitude: float = 0.5
    ramp: float = 0.01  # trapezoid ramp time; 0 gives a rectangular pulse

    def value(self, t: float) -> float:
        s = t - self.start
        if s <= 0.0 or s >= self.duration:
            return 0.0
        if self.ramp > 0.0 and s < self.ramp:
            return self.amplitude * s / self.ramp
        if self.ramp > 0.0 and s > self.duration - self.ramp:
            return self.amplitude * (self.duration - s) / self.ramp
        return self.amplitude


@dataclass
class Excite:
    """Ballistic flight (already launched) with per-motor pulse schedule."""

    pulses: List[MotorPulse]
    omega0_deg: Sequence[float] = (0.0, 0.0, 0.0)
    duration: Optional[float] = None  # defaults to last pulse end + 0.1 s


@dataclass
class GroundTruth:
    r_true: np.ndarray  # IMU offset in IMU frame
    q_UB: np.ndarray  # body-to-IMU quaternion used by the sensor model
    G1f_true: np.ndarray  # IMU frame
    G1tau_true: np.ndarray  # IMU frame
    airborne: Optional[Tuple[float, float]]
    omega_dot_true: np.ndarray  # (n,3), IMU frame
    cog_force_true: np.ndarray  # (n,3) specific force at CoG, IMU frame


@dataclass
class SensorLog:
    rate: float  # Hz
    t: np.ndarray  # (n,)
    gyro: np.ndarray  # (n,3) rad/s, IMU frame
    accel: np.ndarray  # (n,3) m/s^2 specific force at the IMU, IMU frame
    u: np.ndarray  # (n,m) motor inputs

    def __len__(self):
        return len(self.t)


def quad_excitation_schedule(
    start: float = 0.25,
    pulse: float = 0.075,
    gap: float = 0.06,
    amplitude: float = 0.5,
    ramp: float = 0.01,
    motors: int = 4,
) -> List[MotorPulse]:
    """Sequential single-motor trapezoidal pulses, ~75 ms each.

    The lead-in before the first pulse leaves pure-tumble samples that
    anchor the gyroscopic-coupling regressors of the torque fit."""
    return [
        MotorPulse(k, start + k * (pulse + gap), pulse, amplitude, ramp)
        for k in range(motors)
    ]


def hex_excitation_schedule(
    start: float = 0.25,
    pulse: float = 0.1,
    gap: float = 0.0,
    amplitude: float = 0.5,
    ramp: float = 0.015,
    motors: int = 6,
) -> List[MotorPulse]:
    """Back-to-back pulses covering 6 motors in a 600 ms excitation span."""
    return [
        MotorPulse(k, start + k * (pulse + gap), pulse, amplitude, ramp)
        for k in range(motors)
    ]


def preset_quadrotor(imu_rotation=None, imu_offset=(0.0, 0.0, 0.0)) -> VehicleConfig:
    """Symmetric 3-inch-class X quadrotor.

    `imu_rotation` is the IMU-to-thrust-frame quaternion the calibration
    should recover; the sensor model applies its inverse to all body-frame
    quantities (equivalent to mounting the IMU rotated).
    """
    q_target = IDENTITY_QUAT if imu_rotation is None else quat_normalize(imu_rotation)
    arm = 0.08
    motors = []
    for k, ang in enumerate((45.0, 135.0, 225.0, 315.0)):
        a = np.radians(ang)
        spin = 1.0 if k % 2 == 0 else -1.0
        motors.append(
            Motor(
                position=arm * np.array([np.cos(a), np.sin(a), 0.0]),
                axis=np.array([0.0, 0.0, -1.0]),
                force_per_u=1.7,
                torque_per_u=spin * 0.02,
            )
        )
    return VehicleConfig(
        mass=0.35,
        inertia=np.diag([2.1e-4, 2.3e-4, 4.0e-4]),
        motors=motors,
        imu_r=np.asarray(imu_offset, dtype=float),
        imu_q=quat_conj(q_target),
    )


def preset_hexarotor(
    constellation_roll_deg: float = 45.0, imu_offset=(0.02, -0.015, 0.01)
) -> VehicleConfig:
    """Fully actuated hexarotor with alternately tilted rotors.

    The whole actuator constellation is rotated in roll relative to the
    IMU, so the energy-optimal moment-free thrust frame sits at
    (yaw, pitch, roll) = (0, 0, constellation_roll_deg) in the IMU frame.
    """
    q_target = euler_to_quat(EulerYPR(0.0, 0.0, constellation_roll_deg))
    q_c = quat_conj(q_target)
    arm = 0.2
    tilt = np.radians(25.0)
    down = np.array([0.0, 0.0, -1.0])
    motors = []
    for k in range(6):
        a = np.radians(60.0 * k)
        radial = np.array([np.cos(a), np.sin(a), 0.0])
        tangent = np.array([-np.sin(a), np.cos(a), 0.0])
        s = 1.0 if k % 2 == 0 else -1.0
        axis = np.cos(tilt) * down + s * np.sin(tilt) * tangent
        motors.append(
            Motor(
                position=rotate(q_c, arm * radial),
                axis=rotate(q_c, axis),
                force_per_u=6.0,
                torque_per_u=s * 0.09,
            )
        )
    return VehicleConfig(
        mass=1.1,
        inertia=np.diag([0.008, 0.009, 0.015]),
        motors=motors,
        imu_r=np.asarray(imu_offset, dtype=float),
        imu_q=IDENTITY_QUAT.copy(),
    )


@njit(cache=True)
def _deriv_nb(y, u, Fcols, taucols, J, Jinv, mass, drag, out, f_cog_out, wdot_out):
    """Rigid-body state derivative. State y = [q (body-to-world), w (body),
    v (world)]; also writes the CoG specific force and omega-dot (body)."""
    qw, qx, qy, qz = y[0], y[1], y[2], y[3]
    w0, w1, w2 = y[4], y[5], y[6]

    f0 = 0.0
    f1 = 0.0
    f2 = 0.0
    t0 = 0.0
    t1 = 0.0
    t2 = 0.0
    for k in range(u.shape[0]):
        uk = u[k]
        f0 += Fcols[0, k] * uk
        f1 += Fcols[1, k] * uk
        f2 += Fcols[2, k] * uk
        t0 += taucols[0, k] * uk
        t1 += taucols[1, k] * uk
        t2 += taucols[2, k] * uk
    f0 /= mass
    f1 /= mass
    f2 /= mass
    if drag != 0.0:
        # world-frame drag -c*v rotated into the body frame
        vx, vy, vz = -drag * y[7] / mass, -drag * y[8] / mass, -drag * y[9] / mass
        # R(q)^T v  via conjugate rotation
        tx = 2.0 * (-qy * vz + qz * vy)
        ty = 2.0 * (-qz * vx + qx * vz)
        tz = 2.0 * (-qx * vy + qy * vx)
        f0 += vx + qw * tx + (-qy * tz + qz * ty)
        f1 += vy + qw * ty + (-qz * tx + qx * tz)
        f2 += vz + qw * tz + (-qx * ty + qy * tx)
    f_cog_out[0] = f0
    f_cog_out[1] = f1
    f_cog_out[2] = f2

    # Jw and gyroscopic torque
    Jw0 = J[0, 0] * w0 + J[0, 1] * w1 + J[0, 2] * w2
    Jw1 = J[1, 0] * w0 + J[1, 1] * w1 + J[1, 2] * w2
    Jw2 = J[2, 0] * w0 + J[2, 1] * w1 + J[2, 2] * w2
    g0 = t0 - (w1 * Jw2 - w2 * Jw1)
    g1 = t1 - (w2 * Jw0 - w0 * Jw2)
    g2 = t2 - (w0 * Jw1 - w1 * Jw0)
    wdot_out[0] = Jinv[0, 0] * g0 + Jinv[0, 1] * g1 + Jinv[0, 2] * g2
    wdot_out[1] = Jinv[1, 0] * g0 + Jinv[1, 1] * g1 + Jinv[1, 2] * g2
    wdot_out[2] = Jinv[2, 0] * g0 + Jinv[2, 1] * g1 + Jinv[2, 2] * g2

    # quaternion kinematics qdot = 0.5 q (0, w)
    out[0] = 0.5 * (-qx * w0 - qy * w1 - qz * w2)
    out[1] = 0.5 * (qw * w0 + qy * w2 - qz * w1)
    out[2] = 0.5 * (qw * w1 - qx * w2 + qz * w0)
    out[3] = 0.5 * (qw * w2 + qx * w1 - qy * w0)
    out[4] = wdot_out[0]
    out[5] = wdot_out[1]
    out[6] = wdot_out[2]
    # vdot = gravity + R(q) f_cog
    tx = 2.0 * (qy * f2 - qz * f1)
    ty = 2.0 * (qz * f0 - qx * f2)
    tz = 2.0 * (qx * f1 - qy * f0)
    out[7] = f0 + qw * tx + (qy * tz - qz * ty)
    out[8] = f1 + qw * ty + (qz * tx - qx * tz)
    out[9] = GRAVITY + f2 + qw * tz + (qx * ty - qy * tx)


@njit(cache=True)
def _integrate_ballistic(y0, U_half, dt, Fcols, taucols, J, Jinv, mass, drag):
    """Fixed-step RK4 over n samples; motor inputs are pre-evaluated on the
    half-step grid (U_half has 2n+1 rows). Sensor-relevant quantities are
    recorded from the exact state derivative at each sample instant."""
    n = (U_half.shape[0] - 1) // 2
    omega = np.empty((n, 3))
    omega_dot = np.empty((n, 3))
    f_cog = np.empty((n, 3))
    y = y0.copy()
    k1 = np.empty(10)
    k2 = np.empty(10)
    k3 = np.empty(10)
    k4 = np.empty(10)
    f_tmp = np.empty(3)
    wd_tmp = np.empty(3)
    for k in range(n):
        _deriv_nb(y, U_half[2 * k], Fcols, taucols, J, Jinv, mass, drag, k1, f_tmp, wd_tmp)
        omega[k, 0] = y[4]
        omega[k, 1] = y[5]
        omega[k, 2] = y[6]
        omega_dot[k] = wd_tmp
        f_cog[k] = f_tmp
        _deriv_nb(y + (0.5 * dt) * k1, U_half[2 * k + 1], Fcols, taucols, J, Jinv, mass, drag, k2, f_tmp, wd_tmp)
        _deriv_nb(y + (0.5 * dt) * k2, U_half[2 * k + 1], Fcols, taucols, J, Jinv, mass, drag, k3, f_tmp, wd_tmp)
        _deriv_nb(y + dt * k3, U_half[2 * k + 2], Fcols, taucols, J, Jinv, mass, drag, k4, f_tmp, wd_tmp)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        qn = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
        y[0] /= qn
        y[1] /= qn
        y[2] /= qn
        y[3] /= qn
    return omega, omega_dot, f_cog, y


class _Dynamics:
    """Rigid-body integration for the ballistic (motors allowed) phase."""

    def __init__(self, config: VehicleConfig):
        self.cfg = config
        self.Fcols = np.ascontiguousarray(config.force_columns())
        self.taucols = np.ascontiguousarray(config.torque_columns())
        self.J = np.ascontiguousarray(config.inertia)
        self.Jinv = np.ascontiguousarray(np.linalg.inv(config.inertia))

    def cog_force(self, q, v, u) -> np.ndarray:
        """Specific force at the CoG, body frame."""
        f = self.Fcols @ u / self.cfg.mass
        if self.cfg.drag_coeff != 0.0:
            f = f + rotate(quat_conj(q), -self.cfg.drag_coeff * v) / self.cfg.mass
        return f

    def omega_dot(self, w, u) -> np.ndarray:
        tau = self.taucols @ u
        return self.Jinv @ (tau - np.cross(w, self.J @ w))

    def run(self, y0, n, dt, t0, u_func):
        """Integrate n samples from state y0; returns per-sample body-frame
        (omega, omega_dot, f_cog) plus the final state."""
        U_half = np.empty((2 * n + 1, self.cfg.m))
        for j in range(2 * n + 1):
            U_half[j] = u_func(t0 + 0.5 * j * dt)
        return _integrate_ballistic(
            np.asarray(y0, dtype=float),
            U_half,
            dt,
            self.Fcols,
            self.taucols,
            self.J,
            self.Jinv,
            self.cfg.mass,
            self.cfg.drag_coeff,
        )


class _Recorder:
    def __init__(self, m: int):
        self.omega = []
        self.omega_dot = []
        self.f_cog = []
        self.u = []
        self.m = m

    def add(self, w, wdot, f_b, u):
        self.omega.append(np.asarray(w, dtype=float))
        self.omega_dot.append(np.asarray(wdot, dtype=float))
        self.f_cog.append(np.asarray(f_b, dtype=float))
        self.u.append(np.asarray(u, dtype=float))


def _rest_samples(rec: _Recorder, q, n: int):
    f_b = quat_to_matrix(q).T @ (-GRAVITY_W)
    zero = np.zeros(3)
    u0 = np.zeros(rec.m)
    for _ in range(n):
        rec.add(zero, zero, f_b, u0)


def simulate(
    config: VehicleConfig,
    scenario,
    rate: float = 2000.0,
    noise: Optional[Tuple[float, float]] = None,
    seed: int = 0,
) -> Tuple[SensorLog, GroundTruth]:
    """Run a scenario and synthesize the IMU log plus ground truth.

    noise is (gyro_sigma, accel_sigma) for additive white noise per axis;
    None means a noiseless log. Deterministic for a given seed.
    """
    if rate < 100.0:
        raise ValueError("rate must be at least 100 Hz")
    dt = 1.0 / rate
    dyn = _Dynamics(config)
    rec = _Recorder(config.m)
    airborne = None

    if isinstance(scenario, Rest):
        _rest_samples(rec, IDENTITY_QUAT, max(3, round(scenario.duration * rate)))

    elif isinstance(scenario, Throw):
        n_lead = round(scenario.lead_in * rate)
        n_fly = round(scenario.duration * rate)
        n_catch = round(scenario.catch_time * rate)
        n_tail = round(scenario.tail * rate)
        _rest_samples(rec, IDENTITY_QUAT, n_lead)

        w0 = np.radians(np.asarray(scenario.omega0_deg, dtype=float))
        v0 = np.array([0.0, 0.0, -GRAVITY * scenario.duration / 2.0])
        y0 = np.concatenate([IDENTITY_QUAT, w0, v0])
        u0 = np.zeros(config.m)
        omega, omega_dot, f_cog, y = dyn.run(y0, n_fly, dt, n_lead * dt, lambda t: u0)
        for k in range(n_fly):
            rec.add(omega[k], omega_dot[k], f_cog[k], u0)
        airborne = (n_lead * dt, (n_lead + n_fly) * dt)

        # catch: rotation and velocity ramp to zero over catch_time
        q, w_c, v_c = y[:4], y[4:7].copy(), y[7:10].copy()
        a_w = -v_c / scenario.catch_time
        wdot_c = -w_c / scenario.catch_time
        for k in range(n_catch):
            s = k / n_catch
            w = w_c * (1.0 - s)
            f_b = quat_to_matrix(q).T @ (a_w - GRAVITY_W)
            rec.add(w, wdot_c, f_b, u0)
            # attitude keeps integrating while the rotation winds down
            k1 = 0.5 * quat_mul(q, np.concatenate([[0.0], w]))
            w_mid = w_c * (1.0 - (k + 0.5) / n_catch)
            q_mid = quat_normalize(q + 0.5 * dt * k1)
            k2 = 0.5 * quat_mul(q_mid, np.concatenate([[0.0], w_mid]))
            q = quat_normalize(q + dt * k2)
        _rest_samples(rec, q, n_tail)

    elif isinstance(scenario, Excite):
        total = scenario.duration
        if total is None:
            total = max(p.start + p.duration for p in scenario.pulses) + 0.1
        n = round(total * rate)
        pulses = scenario.pulses

        def u_func(t):
            u = np.zeros(config.m)
            for p in pulses:
                u[p.motor] += p.value(t)
            return u

        w0 = np.radians(np.asarray(scenario.omega0_deg, dtype=float))
        y0 = np.concatenate([IDENTITY_QUAT, w0, np.zeros(3)])
        omega, omega_dot, f_cog, _ = dyn.run(y0, n, dt, 0.0, u_func)
        for k in range(n):
            rec.add(omega[k], omega_dot[k], f_cog[k], u_func(k * dt))
        airborne = (0.0, n * dt)

    else:
        raise ValueError(f"unknown scenario type {type(scenario).__name__}")

    omega_b = np.vstack(rec.omega)
    omega_dot_b = np.vstack(rec.omega_dot)
    f_cog_b = np.vstack(rec.f_cog)
    u_log = np.vstack(rec.u)
    n = len(omega_b)
    t = np.arange(n) * dt

    R_u = quat_to_matrix(config.imu_q)
    lever = np.einsum("nij,j->ni", lever_arm_matrices(omega_b, omega_dot_b), config.imu_r)
    gyro = omega_b @ R_u.T
    accel = (f_cog_b + lever) @ R_u.T
    if noise is not None:
        gyro_sigma, accel_sigma = noise
        rng = np.random.default_rng(seed)
        gyro = gyro + rng.normal(0.0, gyro_sigma, gyro.shape)
        accel = accel + rng.normal(0.0, accel_sigma, accel.shape)

    G1f, G1tau = config.true_effectiveness()
    truth = GroundTruth(
        r_true=R_u @ config.imu_r,
        q_UB=config.imu_q.copy(),
        G1f_true=G1f,
        G1tau_true=G1tau,
        airborne=airborne,
        omega_dot_true=omega_dot_b @ R_u.T,
        cog_force_true=f_cog_b @ R_u.T,
    )
    return SensorLog(rate=rate, t=t, gyro=gyro, accel=accel, u=u_log), truth
