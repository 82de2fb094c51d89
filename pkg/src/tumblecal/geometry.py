"""Quaternion and 3-vector algebra shared by all calibration stages.

Conventions:
    - Vectors are numpy arrays of shape (3,), quaternions of shape (4,)
      ordered [w, x, y, z] (Hamilton product, active rotations).
    - Euler angles are intrinsic Z-Y-X (yaw, pitch, roll), in degrees.
    - Reported quaternions are canonicalized to w >= 0 (double cover).
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])

# |sin(pitch)| above this is treated as gimbal lock. The nominal contract
# (pitch within 1e-6 deg of +-90 deg) sits below float64 resolution of
# asin near 1, so the practical cutoff is slightly wider.
_GIMBAL_SIN_PITCH = 1.0 - 1e-12


class EulerYPR(NamedTuple):
    """Intrinsic Z-Y-X Euler angles in degrees (yaw, pitch, roll)."""

    yaw: float
    pitch: float
    roll: float


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero quaternion")
    return q / n


def quat_canonical(q) -> np.ndarray:
    """Flip sign so w >= 0 (q and -q encode the same rotation)."""
    q = np.asarray(q, dtype=float)
    return -q if q[0] < 0.0 else q.copy()


def quat_conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a*b (apply b first, then a, under `rotate`)."""
    aw, ax, ay, az = np.asarray(a, dtype=float)
    bw, bx, by, bz = np.asarray(b, dtype=float)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q (active rotation)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w, qv = q[0], q[1:]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


def quat_to_matrix(q) -> np.ndarray:
    """3x3 matrix R with R @ v == rotate(q, v). Internal helper."""
    w, x, y, z = np.asarray(q, dtype=float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle_rad
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def euler_to_quat(e: EulerYPR) -> np.ndarray:
    """Intrinsic Z-Y-X composition q = q_z(yaw) * q_y(pitch) * q_x(roll)."""
    yaw, pitch, roll = (np.radians(a) * 0.5 for a in e)
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    q = np.array(
        [
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        ]
    )
    return quat_canonical(q)


def quat_to_euler(q) -> EulerYPR:
    """Inverse of euler_to_quat. At gimbal lock (|pitch| = 90 deg) the
    yaw/roll split is ambiguous; roll is set to 0 and a warning is issued."""
    q = quat_normalize(q)
    R = quat_to_matrix(q)
    sp = -R[2, 0]
    if abs(sp) >= _GIMBAL_SIN_PITCH:
        warnings.warn("gimbal lock: |pitch| = 90 deg, setting roll = 0", stacklevel=2)
        pitch = np.copysign(90.0, sp)
        # with roll := 0, the remaining rotation is pure yaw
        yaw = np.degrees(np.arctan2(-R[0, 1], R[1, 1]))
        return EulerYPR(yaw, pitch, 0.0)
    pitch = np.degrees(np.arcsin(np.clip(sp, -1.0, 1.0)))
    yaw = np.degrees(np.arctan2(R[1, 0], R[0, 0]))
    roll = np.degrees(np.arctan2(R[2, 1], R[2, 2]))
    return EulerYPR(yaw, pitch, roll)


def shortest_rotation(v_from, v_to) -> np.ndarray:
    """Minimal-angle unit quaternion q with rotate(q, v_from) || v_to.

    The rotation axis is orthogonal to both inputs. For antipodal inputs
    the axis is ambiguous; by convention a 180 deg rotation about x is
    returned (about y when v_from is collinear with x).
    """
    f = np.asarray(v_from, dtype=float)
    t = np.asarray(v_to, dtype=float)
    nf, nt = np.linalg.norm(f), np.linalg.norm(t)
    if nf < 1e-15 or nt < 1e-15:
        raise ValueError("shortest_rotation requires nonzero vectors")
    f, t = f / nf, t / nt
    c = np.cross(f, t)
    d = float(np.dot(f, t))
    if d < 0.0 and np.linalg.norm(c) < 1e-9:
        # antipodal: pick a deterministic axis orthogonal to f
        axis = np.array([1.0, 0.0, 0.0])
        if abs(f[0]) > 1.0 - 1e-9:
            axis = np.array([0.0, 1.0, 0.0])
        axis = axis - np.dot(axis, f) * f
        axis /= np.linalg.norm(axis)
        return quat_canonical(np.concatenate(([0.0], axis)))
    q = np.concatenate(([1.0 + d], c))
    return quat_canonical(quat_normalize(q))


def quat_angle_deg(a, b) -> float:
    """Rotation angle between two unit quaternions, in degrees."""
    dot = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return float(np.degrees(2.0 * np.arccos(min(dot, 1.0))))
