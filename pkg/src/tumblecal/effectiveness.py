"""Steady-state actuator effectiveness identification.

Fits the linear maps from motor inputs u to specific force (G1f, via
lever-arm-compensated accelerometer data) and to angular acceleration
(G1tau, via differentiated gyro data) with per-row recursive least squares
over a sequential single-motor excitation log.

The torque rows carry six extra quadratic rate regressors (wx^2, wy^2,
wz^2, wx*wy, wx*wz, wy*wz). Open-loop excitation leaves the vehicle
spinning, so the rigid-body coupling term J^-1 (w x Jw) — an unknown
quadratic form in w — acts on the gyro data at the same order as the motor
torques; absorbing it keeps the u-columns unbiased. The identified G1tau
is the u-block of the augmented fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteExcitationError
from .rigidbody import central_difference, lever_arm_matrices, lowpass

N_QUAD_FEATURES = 6


@dataclass
class EffectivenessModel:
    """Specific-force and torque effectiveness with actuator bounds.

    G1f: (3, m) specific force per unit input, (m/s^2)/1
    G1tau: (3, m) angular acceleration per unit input, (rad/s^2)/1
    """

    G1f: np.ndarray
    G1tau: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray

    def __post_init__(self):
        self.G1f = np.asarray(self.G1f, dtype=float)
        self.G1tau = np.asarray(self.G1tau, dtype=float)
        m = self.G1f.shape[1]
        self.u_min = np.broadcast_to(np.asarray(self.u_min, dtype=float), (m,)).copy()
        self.u_max = np.broadcast_to(np.asarray(self.u_max, dtype=float), (m,)).copy()
        if self.G1f.shape != (3, m) or self.G1tau.shape != (3, m):
            raise ValueError("G1f and G1tau must both be 3 x m")
        if m < 4:
            raise ValueError("need at least 4 motors")
        if not (np.all(np.isfinite(self.G1f)) and np.all(np.isfinite(self.G1tau))):
            raise ValueError("effectiveness matrices must be finite")
        if np.any(self.u_min >= self.u_max):
            raise ValueError("u_min must be elementwise below u_max")

    @property
    def m(self) -> int:
        return self.G1f.shape[1]


@dataclass
class RlsState:
    """Exponentially-forgetting RLS state for one scalar output row."""

    theta: np.ndarray
    P: np.ndarray
    forgetting: float = 1.0
    count: int = 0
    p0: float = 100.0
    reinit_count: int = 0
    _since_pd_check: int = field(default=0, repr=False)

    @classmethod
    def zeros(cls, n: int, forgetting: float = 1.0, p0: float = 100.0) -> "RlsState":
        return cls(theta=np.zeros(n), P=p0 * np.eye(n), forgetting=forgetting, p0=p0)


def rls_update(state: RlsState, u, y: float) -> RlsState:
    """One RLS step with regressor u and scalar observation y.

    If the covariance loses positive definiteness numerically it is
    reinitialized to p0*I and `reinit_count` is bumped.
    """
    a = np.asarray(u, dtype=float)
    lam = state.forgetting
    P = state.P
    Pa = P @ a
    denom = lam + a @ Pa
    k = Pa / denom
    e = y - state.theta @ a
    state.theta = state.theta + k * e
    P = (P - np.outer(k, Pa)) / lam
    state.P = 0.5 * (P + P.T)
    state.count += 1
    state._since_pd_check += 1
    bad = not np.all(np.isfinite(state.P)) or np.any(np.diag(state.P) <= 0.0)
    if not bad and state._since_pd_check >= 100:
        state._since_pd_check = 0
        bad = np.linalg.eigvalsh(state.P)[0] <= 0.0
    if bad:
        state.P = state.p0 * np.eye(len(state.theta))
        state.reinit_count += 1
    return state


def quad_rate_features(omega: np.ndarray) -> np.ndarray:
    """Quadratic monomials of the rate vector, (n,3) -> (n,6)."""
    w = np.atleast_2d(np.asarray(omega, dtype=float))
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    return np.column_stack([wx * wx, wy * wy, wz * wz, wx * wy, wx * wz, wy * wz])


def steady_state_mask(t: np.ndarray, u: np.ndarray, settle_s: float) -> np.ndarray:
    """True where no motor input has changed within the last settle_s."""
    changed = np.zeros(len(t), dtype=bool)
    changed[1:] = np.any(np.abs(np.diff(u, axis=0)) > 1e-12, axis=1)
    last_change = np.full(len(t), -np.inf)
    t_ch = -np.inf
    for i in range(len(t)):
        if changed[i]:
            t_ch = t[i]
        last_change[i] = t_ch
    return (t - last_change) >= settle_s


def excited_motors(u: np.ndarray, activity_thresh: float = 1e-6) -> np.ndarray:
    return np.where(np.max(np.abs(u), axis=0) > activity_thresh)[0]


def _build_channels(log, r, cutoff_hz):
    """Raw regression channels, then one shared causal low-pass.

    The sample-wise model is linear with constant coefficients, so
    filtering every channel (observations and regressors) with the same
    filter preserves it exactly while attenuating noise.
    """
    dt = 1.0 / log.rate
    omega = np.asarray(log.gyro, dtype=float)
    omega_dot = central_difference(omega, dt)
    X = lever_arm_matrices(omega, omega_dot)
    f_comp = np.asarray(log.accel, dtype=float) - np.einsum("nij,j->ni", X, np.asarray(r, dtype=float))
    channels = np.hstack(
        [f_comp, omega_dot, np.asarray(log.u, dtype=float), quad_rate_features(omega)]
    )
    filt = lowpass(channels, dt, cutoff_hz)
    m = log.u.shape[1]
    f_f = filt[:, 0:3]
    wd_f = filt[:, 3:6]
    u_f = filt[:, 6 : 6 + m]
    quad_f = filt[:, 6 + m :]
    return f_f, wd_f, u_f, quad_f


def _column_scales(regressors: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-column RMS over the gated samples, floored to stay invertible.

    The quadratic rate features run orders of magnitude larger than the
    motor inputs; normalizing the regressors keeps the RLS prior (p0*I on
    the scaled problem) from biasing the small-scale columns.
    """
    sel = regressors[mask] if np.any(mask) else regressors
    rms = np.sqrt(np.mean(sel**2, axis=0))
    return np.maximum(rms, 1e-9 * max(float(np.max(rms)), 1.0))


def fit_from_log(
    log,
    r,
    schedule=None,
    cutoff_hz: float = 30.0,
    settle_s: float = 0.04,
    forgetting: float = 0.999,
    p0: float = 100.0,
    u_bounds=(0.0, 1.0),
) -> EffectivenessModel:
    """Identify G1f and G1tau from a sequential-excitation sensor log.

    r is the IMU offset (from the throw calibration) used to compensate
    accelerometer readings to the center of gravity. `schedule`, when
    given, is an iterable of motor indices expected to have been excited;
    by default every motor in the log must show activity.
    """
    m = log.u.shape[1]
    expected = range(m) if schedule is None else schedule
    active = set(excited_motors(log.u).tolist())
    missing = [k for k in expected if k not in active]
    if missing:
        raise IncompleteExcitationError(
            f"no excitation seen for motors {missing}", missing=missing
        )

    f_f, wd_f, u_f, quad_f = _build_channels(log, r, cutoff_hz)
    mask = steady_state_mask(log.t, log.u, settle_s)
    mask &= log.t >= log.t[0] + 3.0 / cutoff_hz  # filter warm-up
    regressors = np.hstack([u_f, quad_f])
    scales = _column_scales(regressors, mask)
    regressors = regressors / scales

    force_states = [RlsState.zeros(m, forgetting, p0) for _ in range(3)]
    torque_states = [RlsState.zeros(m + N_QUAD_FEATURES, forgetting, p0) for _ in range(3)]
    for i in np.where(mask)[0]:
        a_force = regressors[i, :m]
        a_torque = regressors[i]
        for axis in range(3):
            rls_update(force_states[axis], a_force, f_f[i, axis])
            rls_update(torque_states[axis], a_torque, wd_f[i, axis])

    G1f = np.vstack([s.theta for s in force_states]) / scales[:m]
    G1tau = np.vstack([s.theta[:m] for s in torque_states]) / scales[:m]
    return EffectivenessModel(G1f=G1f, G1tau=G1tau, u_min=u_bounds[0], u_max=u_bounds[1])


def replay_fit(
    log,
    r,
    stride: int = 20,
    cutoff_hz: float = 30.0,
    settle_s: float = 0.04,
    forgetting: float = 0.999,
    p0: float = 100.0,
    u_bounds=(0.0, 1.0),
):
    """Stream the same fit sample by sample, yielding (t, model) snapshots
    every `stride` samples. Used to replay how the identified model (and
    the thrust frame computed from it) evolves during excitation."""
    m = log.u.shape[1]
    f_f, wd_f, u_f, quad_f = _build_channels(log, r, cutoff_hz)
    mask = steady_state_mask(log.t, log.u, settle_s)
    mask &= log.t >= log.t[0] + 3.0 / cutoff_hz
    regressors = np.hstack([u_f, quad_f])
    scales = _column_scales(regressors, mask)  # whole-log statistics; replay of a recording
    regressors = regressors / scales

    force_states = [RlsState.zeros(m, forgetting, p0) for _ in range(3)]
    torque_states = [RlsState.zeros(m + N_QUAD_FEATURES, forgetting, p0) for _ in range(3)]
    for i in range(len(log.t)):
        if mask[i]:
            a_force = regressors[i, :m]
            a_torque = regressors[i]
            for axis in range(3):
                rls_update(force_states[axis], a_force, f_f[i, axis])
                rls_update(torque_states[axis], a_torque, wd_f[i, axis])
        if (i + 1) % stride == 0 or i == len(log.t) - 1:
            G1f = np.vstack([s.theta for s in force_states]) / scales[:m]
            G1tau = np.vstack([s.theta[:m] for s in torque_states]) / scales[:m]
            try:
                model = EffectivenessModel(
                    G1f=G1f, G1tau=G1tau, u_min=u_bounds[0], u_max=u_bounds[1]
                )
            except ValueError:
                continue
            yield log.t[i], model
