"""File formats: the sensor-log CSV and the JSON artifacts exchanged
between pipeline stages. All writes are atomic (temp file + rename) and
all JSON artifacts carry a schema_version field.

CSV schema (SI units):
    # tumblecal sensor log
    # schema_version=1
    # rate_hz=<float>
    # accel convention: specific force at the IMU; at rest the z-down IMU reads (0,0,-9.81)
    t,gx,gy,gz,ax,ay,az,u1,...,um

Values are serialized with 9 significant digits, which round-trips
exactly for data already at that precision.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Optional

import numpy as np

from .effectiveness import EffectivenessModel
from .errors import ConfigError
from .geometry import quat_normalize
from .imu_offset import ConfidenceEllipsoid, OffsetEstimate
from .qcqp_oracle import OracleSolution
from .sim import GroundTruth, Motor, SensorLog, VehicleConfig
from .thrust_frame import ThrustFrameSolution

SCHEMA_VERSION = 1
_FMT = "%.9g"


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sensor_log(path: str, log: SensorLog) -> None:
    m = log.u.shape[1]
    lines = [
        "# tumblecal sensor log",
        f"# schema_version={SCHEMA_VERSION}",
        f"# rate_hz={_FMT % log.rate}",
        "# accel convention: specific force at the IMU; at rest the z-down IMU reads (0,0,-9.81)",
        "t,gx,gy,gz,ax,ay,az," + ",".join(f"u{k + 1}" for k in range(m)),
    ]
    data = np.hstack([log.t[:, None], log.gyro, log.accel, log.u])
    for row in data:
        lines.append(",".join(_FMT % v for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_sensor_log(path: str) -> SensorLog:
    rate = None
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "rate_hz=" in line:
                    rate = float(line.split("rate_hz=", 1)[1])
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise ConfigError(f"{path}: not a sensor log (missing header or data)")
    if header[:7] != ["t", "gx", "gy", "gz", "ax", "ay", "az"]:
        raise ConfigError(f"{path}: unexpected column header {header[:7]}")
    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    if rate is None:
        rate = 1.0 / np.median(np.diff(t))
    dt = np.diff(t)
    if len(dt) and (np.any(dt <= 0) or np.max(np.abs(dt - 1.0 / rate)) > 0.01 / rate):
        raise ConfigError(f"{path}: time column is not uniform at rate_hz={rate}")
    return SensorLog(rate=rate, t=t, gyro=data[:, 1:4], accel=data[:, 4:7], u=data[:, 7:])


def _dump_json(path: str, payload: dict) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not JSON serializable: {type(o)}")

    atomic_write_text(path, json.dumps(payload, indent=2, default=default) + "\n")


def _finite_or_none(x: float):
    return float(x) if np.isfinite(x) else None


def write_ground_truth(path: str, truth: GroundTruth) -> None:
    _dump_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "r_true": truth.r_true,
            "q_UB": truth.q_UB,
            "G1f_true": truth.G1f_true.ravel(),
            "G1tau_true": truth.G1tau_true.ravel(),
            "airborne": list(truth.airborne) if truth.airborne else None,
        },
    )


def write_offset_estimate(
    path: str, est: OffsetEstimate, ellipsoid: Optional[ConfidenceEllipsoid] = None
) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "r_hat": est.r_hat,
        "covariance": est.covariance.ravel(),
        "se2": est.standard_error_sq,
        "n_rows": est.n_rows,
        "condition_number": _finite_or_none(est.condition_number),
    }
    if ellipsoid is not None:
        payload["ellipsoid_95"] = {
            "semi_axes": ellipsoid.semi_axes,
            "axes_dirs": ellipsoid.axes_dirs.ravel(),
        }
    _dump_json(path, payload)


def read_offset_estimate(path: str) -> OffsetEstimate:
    with open(path) as fh:
        d = json.load(fh)
    for key in ("r_hat", "covariance", "se2", "n_rows"):
        if key not in d:
            raise ConfigError(f"{path}: missing field '{key}'")
    cond = d.get("condition_number")
    return OffsetEstimate(
        r_hat=np.asarray(d["r_hat"], dtype=float),
        covariance=np.asarray(d["covariance"], dtype=float).reshape(3, 3),
        standard_error_sq=float(d["se2"]),
        n_rows=int(d["n_rows"]),
        condition_number=np.inf if cond is None else float(cond),
    )


def write_effectiveness_model(path: str, model: EffectivenessModel) -> None:
    _dump_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "m": model.m,
            "G1f": model.G1f.ravel(),
            "G1tau": model.G1tau.ravel(),
            "u_min": model.u_min,
            "u_max": model.u_max,
        },
    )


def read_effectiveness_model(path: str) -> EffectivenessModel:
    with open(path) as fh:
        d = json.load(fh)
    for key in ("m", "G1f", "G1tau", "u_min", "u_max"):
        if key not in d:
            raise ConfigError(f"{path}: missing field '{key}'")
    m = int(d["m"])
    return EffectivenessModel(
        G1f=np.asarray(d["G1f"], dtype=float).reshape(3, m),
        G1tau=np.asarray(d["G1tau"], dtype=float).reshape(3, m),
        u_min=np.asarray(d["u_min"], dtype=float),
        u_max=np.asarray(d["u_max"], dtype=float),
    )


def write_thrust_frame_solution(path: str, sol: ThrustFrameSolution) -> None:
    e = sol.euler_ypr_deg
    _dump_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "u_star": sol.u_star,
            "d": sol.d,
            "lambda": sol.lam,
            "q_TU": sol.q_TU,
            "euler_ypr_deg": [e.yaw, e.pitch, e.roll],
            "iterations_used": sol.iterations_used,
            "converged": bool(sol.converged),
        },
    )


def write_oracle_solution(path: str, sol: OracleSolution) -> None:
    _dump_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "u": sol.u,
            "objective": _finite_or_none(sol.objective),
            "feasible": bool(sol.feasible),
            "kkt_residual": _finite_or_none(sol.kkt_residual),
        },
    )


def load_vehicle_config(path: str) -> VehicleConfig:
    """Vehicle JSON: {mass, inertia: [9] or [3], motors: [{position,
    axis, force_per_u, torque_per_u}], imu: {r, q_UB}, u_bounds: [lo, hi]}."""
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc

    def require(obj, key, where):
        if key not in obj:
            raise ConfigError(f"{path}: missing field '{where}{key}'")
        return obj[key]

    mass = require(d, "mass", "")
    inertia = np.asarray(require(d, "inertia", ""), dtype=float)
    if inertia.size == 3:
        inertia = np.diag(inertia)
    elif inertia.size == 9:
        inertia = inertia.reshape(3, 3)
    else:
        raise ConfigError(f"{path}: field 'inertia' must have 3 or 9 entries")
    motors = []
    for i, md in enumerate(require(d, "motors", "")):
        motors.append(
            Motor(
                position=np.asarray(require(md, "position", f"motors[{i}]."), dtype=float),
                axis=np.asarray(require(md, "axis", f"motors[{i}]."), dtype=float),
                force_per_u=float(require(md, "force_per_u", f"motors[{i}].")),
                torque_per_u=float(require(md, "torque_per_u", f"motors[{i}].")),
            )
        )
    imu = require(d, "imu", "")
    u_bounds = d.get("u_bounds", [0.0, 1.0])
    try:
        return VehicleConfig(
            mass=float(mass),
            inertia=inertia,
            motors=motors,
            imu_r=np.asarray(require(imu, "r", "imu."), dtype=float),
            imu_q=quat_normalize(require(imu, "q_UB", "imu.")),
            u_min=float(u_bounds[0]),
            u_max=float(u_bounds[1]),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_vehicle_config(path: str, config: VehicleConfig) -> None:
    _dump_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "mass": config.mass,
            "inertia": config.inertia.ravel(),
            "motors": [
                {
                    "position": mt.position,
                    "axis": mt.axis,
                    "force_per_u": mt.force_per_u,
                    "torque_per_u": mt.torque_per_u,
                }
                for mt in config.motors
            ],
            "imu": {"r": config.imu_r, "q_UB": config.imu_q},
            "u_bounds": [config.u_min, config.u_max],
        },
    )
