"""Rotating-frame kinematics: point acceleration on a spinning rigid body,
the free-tumble regressor relating accelerometer readings to the sensor
lever arm, and rate differentiation/filtering for sampled gyro data.

All vector quantities of one call must share a frame; the relations are
covariant under a common rotation, so the IMU frame works throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal


@dataclass
class AngularState:
    """Body rotation rate (rad/s) and its time derivative (rad/s^2)."""

    omega: np.ndarray
    omega_dot: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.omega_dot = np.asarray(self.omega_dot, dtype=float)


@dataclass
class RegressorRow:
    """One accelerometer sample as a linear equation X @ r = y in the
    unknown sensor offset r. X has units 1/s^2, y is m/s^2."""

    X: np.ndarray
    y: np.ndarray


def point_acceleration(a_frame, r, r_dot, r_ddot, s: AngularState) -> np.ndarray:
    """Inertial acceleration of a point at r in a rotating frame:
    a + r'' + 2 w x r' + w' x r + w x (w x r)."""
    a_frame = np.asarray(a_frame, dtype=float)
    r = np.asarray(r, dtype=float)
    r_dot = np.asarray(r_dot, dtype=float)
    r_ddot = np.asarray(r_ddot, dtype=float)
    w, wd = s.omega, s.omega_dot
    return (
        a_frame
        + r_ddot
        + 2.0 * np.cross(w, r_dot)
        + np.cross(wd, r)
        + np.cross(w, np.cross(w, r))
    )


def lever_arm_matrix(omega, omega_dot) -> np.ndarray:
    """Matrix X with X @ r = w' x r + w x (w x r) for a rigidly mounted
    point (r' = r'' = 0)."""
    wx, wy, wz = np.asarray(omega, dtype=float)
    dx, dy, dz = np.asarray(omega_dot, dtype=float)
    return np.array(
        [
            [-wy * wy - wz * wz, wx * wy - dz, wx * wz + dy],
            [wx * wy + dz, -wx * wx - wz * wz, wy * wz - dx],
            [wx * wz - dy, wy * wz + dx, -wx * wx - wy * wy],
        ]
    )


def regressor_row(s: AngularState, accel_meas) -> RegressorRow:
    """Free-tumble regressor row: accelerometer reading y against X @ r."""
    y = np.asarray(accel_meas, dtype=float)
    return RegressorRow(X=lever_arm_matrix(s.omega, s.omega_dot), y=y)


def lever_arm_matrices(omega: np.ndarray, omega_dot: np.ndarray) -> np.ndarray:
    """Vectorized lever_arm_matrix: (n,3),(n,3) -> (n,3,3)."""
    w = np.asarray(omega, dtype=float)
    d = np.asarray(omega_dot, dtype=float)
    n = w.shape[0]
    X = np.empty((n, 3, 3))
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    X[:, 0, 0] = -wy * wy - wz * wz
    X[:, 0, 1] = wx * wy - dz
    X[:, 0, 2] = wx * wz + dy
    X[:, 1, 0] = wx * wy + dz
    X[:, 1, 1] = -wx * wx - wz * wz
    X[:, 1, 2] = wy * wz - dx
    X[:, 2, 0] = wx * wz - dy
    X[:, 2, 1] = wy * wz + dx
    X[:, 2, 2] = -wx * wx - wy * wy
    return X


def compensate_to_cog(accel_meas, r, s: AngularState) -> np.ndarray:
    """Remove the lever-arm terms from an accelerometer reading, giving the
    specific force at the center of gravity."""
    accel_meas = np.asarray(accel_meas, dtype=float)
    r = np.asarray(r, dtype=float)
    return accel_meas - lever_arm_matrix(s.omega, s.omega_dot) @ r


def lowpass(series: np.ndarray, dt: float, cutoff_hz: float) -> np.ndarray:
    """Causal second-order Butterworth low-pass along axis 0, initialized
    at steady state for the first sample (no zero-state startup kick)."""
    series = np.asarray(series, dtype=float)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not 0.0 < cutoff_hz < 0.5 / dt:
        raise ValueError("cutoff_hz must lie in (0, Nyquist)")
    b, a = signal.butter(2, cutoff_hz, fs=1.0 / dt)
    zi = signal.lfilter_zi(b, a)
    x = np.atleast_2d(series.T)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        out[i], _ = signal.lfilter(b, a, x[i], zi=zi * x[i, 0])
    return out.T.reshape(series.shape)


def central_difference(series: np.ndarray, dt: float) -> np.ndarray:
    """Central-difference time derivative along axis 0; one-sided at the
    first and last samples."""
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 3:
        raise ValueError("need at least 3 samples to differentiate")
    d = np.empty_like(series)
    d[1:-1] = (series[2:] - series[:-2]) / (2.0 * dt)
    d[0] = (series[1] - series[0]) / dt
    d[-1] = (series[-1] - series[-2]) / dt
    return d


def differentiate_rates(gyro_series: np.ndarray, dt: float, cutoff_hz: float) -> np.ndarray:
    """Angular acceleration from sampled rates: central difference followed
    by a causal second-order low-pass at cutoff_hz."""
    return lowpass(central_difference(gyro_series, dt), dt, cutoff_hz)
