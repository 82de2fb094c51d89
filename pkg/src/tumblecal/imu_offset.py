"""IMU position (lever arm) estimation from free-tumble data.

Regressor rows from throws are folded into constant-memory normal-equation
accumulators (X'X, X'y, sum ||y||^2); accumulators from different throws
merge by addition. Batch least squares and a streaming RLS form solve for
the offset, and the 95% confidence ellipsoid comes from the residual
variance scaled parameter covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CalibrationError, InsufficientExcitationError
from .rigidbody import RegressorRow, central_difference, lever_arm_matrices, lowpass


@dataclass
class OffsetAccumulator:
    """Normal equations of the stacked regression, O(1) memory in rows."""

    xtx: np.ndarray
    xty: np.ndarray
    yy: float
    n_rows: int

    @classmethod
    def zeros(cls) -> "OffsetAccumulator":
        return cls(xtx=np.zeros((3, 3)), xty=np.zeros(3), yy=0.0, n_rows=0)

    def update(self, row: RegressorRow) -> None:
        X, y = row.X, row.y
        self.xtx += X.T @ X
        self.xty += X.T @ y
        self.yy += float(y @ y)
        self.n_rows += 1

    def __add__(self, other: "OffsetAccumulator") -> "OffsetAccumulator":
        return OffsetAccumulator(
            xtx=self.xtx + other.xtx,
            xty=self.xty + other.xty,
            yy=self.yy + other.yy,
            n_rows=self.n_rows + other.n_rows,
        )

    def rss(self, r) -> float:
        """Residual sum of squares ||y - X r||^2 at a candidate offset."""
        r = np.asarray(r, dtype=float)
        return float(self.yy - 2.0 * r @ self.xty + r @ self.xtx @ r)


@dataclass
class OffsetEstimate:
    r_hat: np.ndarray  # m
    covariance: np.ndarray  # m^2
    standard_error_sq: float  # (m/s^2)^2 residual variance
    n_rows: int
    condition_number: float


@dataclass
class ConfidenceEllipsoid:
    center: np.ndarray
    semi_axes: np.ndarray  # m, descending
    axes_dirs: np.ndarray  # rows are unit directions matching semi_axes


def accumulate(rows: Iterable[RegressorRow]) -> OffsetAccumulator:
    acc = OffsetAccumulator.zeros()
    for row in rows:
        acc.update(row)
    return acc


def chi2_quantile_3dof(level: float) -> float:
    """Quantile of the chi-squared distribution with 3 degrees of freedom,
    via Newton inversion of the closed-form CDF
    F(x) = erf(sqrt(x/2)) - sqrt(2/pi) sqrt(x) exp(-x/2)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")

    def cdf(x):
        return math.erf(math.sqrt(x / 2.0)) - math.sqrt(2.0 / math.pi) * math.sqrt(x) * math.exp(-x / 2.0)

    def pdf(x):
        return math.sqrt(x / (2.0 * math.pi)) * math.exp(-x / 2.0)

    lo, hi = 0.0, 1.0
    while cdf(hi) < level:
        lo, hi = hi, hi * 2.0
    x = 0.5 * (lo + hi)
    for _ in range(100):
        f = cdf(x) - level
        if f > 0.0:
            hi = x
        else:
            lo = x
        step = f / max(pdf(x), 1e-300)
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-14 * max(1.0, x):
            return x_new
        x = x_new
    return x


def solve_ls(acc: OffsetAccumulator, cond_cap: float = 1e10) -> OffsetEstimate:
    """Batch least-squares offset from accumulated normal equations.

    Raises InsufficientExcitationError (naming the weakest direction) when
    X'X is singular or its condition number exceeds cond_cap.
    """
    if acc.n_rows < 4:
        raise InsufficientExcitationError(
            f"need at least 4 regressor rows, got {acc.n_rows}"
        )
    w, V = np.linalg.eigh(acc.xtx)
    cond = np.inf if w[0] <= 0.0 else w[-1] / w[0]
    if not np.isfinite(cond) or cond > cond_cap:
        direction = V[:, 0]
        raise InsufficientExcitationError(
            "insufficient excitation: X'X condition number "
            f"{cond:.3g} exceeds {cond_cap:.3g}; weakest direction "
            f"[{direction[0]:+.3f}, {direction[1]:+.3f}, {direction[2]:+.3f}]",
            direction=direction,
            condition_number=cond,
        )
    r_hat = np.linalg.solve(acc.xtx, acc.xty)
    dof = 3 * acc.n_rows - 3  # three scalar equations per accumulated row
    se2 = max(acc.rss(r_hat), 0.0) / dof
    xtx_inv = (V / w) @ V.T
    cov = se2 * 0.5 * (xtx_inv + xtx_inv.T)
    return OffsetEstimate(
        r_hat=r_hat,
        covariance=cov,
        standard_error_sq=se2,
        n_rows=acc.n_rows,
        condition_number=float(cond),
    )


def solve_rls(
    rows: Iterable[RegressorRow],
    forgetting: float = 1.0,
    p0: float = 1.0,
    r0=(0.0, 0.0, 0.0),
) -> OffsetEstimate:
    """Streaming RLS offset estimate, constant memory.

    Each accelerometer sample contributes three scalar updates; the
    forgetting factor applies per scalar observation. With forgetting 1
    and a large prior this converges to the batch LS solution.
    """
    if not 0.9 < forgetting <= 1.0:
        raise ValueError("forgetting must lie in (0.9, 1.0]")
    theta = np.asarray(r0, dtype=float).copy()
    P = p0 * np.eye(3)
    rss = 0.0
    n_rows = 0
    for row in rows:
        for i in range(3):
            a = row.X[i]
            y = float(row.y[i])
            Pa = P @ a
            denom = forgetting + a @ Pa
            k = Pa / denom
            e_pre = y - theta @ a
            theta = theta + k * e_pre
            e_post = y - theta @ a
            rss = forgetting * rss + e_pre * e_post
            P = (P - np.outer(k, Pa)) / forgetting
            P = 0.5 * (P + P.T)
        n_rows += 1
    w = np.linalg.eigvalsh(P)
    cond = np.inf if w[0] <= 0.0 else w[-1] / w[0]
    dof = max(3 * n_rows - 3, 1)
    se2 = max(rss, 0.0) / dof if n_rows else 0.0
    return OffsetEstimate(
        r_hat=theta,
        covariance=se2 * P if n_rows else P.copy(),
        standard_error_sq=se2,
        n_rows=n_rows,
        condition_number=float(cond),
    )


def confidence_ellipsoid(est: OffsetEstimate, level: float = 0.95) -> ConfidenceEllipsoid:
    """Level-set ellipsoid (r - r_hat)' Sigma^-1 (r - r_hat) = chi2_3(level)."""
    w, V = np.linalg.eigh(est.covariance)
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise CalibrationError("covariance must be positive definite")
    q = chi2_quantile_3dof(level)
    semi = np.sqrt(q * w)[::-1]
    dirs = V[:, ::-1].T.copy()
    return ConfidenceEllipsoid(center=est.r_hat.copy(), semi_axes=semi, axes_dirs=dirs)


@dataclass
class FreefallSegment:
    start: int  # sample index, inclusive
    stop: int  # sample index, exclusive
    t_start: float
    t_stop: float
    mean_gyro_norm: float


def detect_freefall_segments(
    log,
    accel_thresh: float = 1.5,
    gyro_thresh: float = 0.0,
    min_len: float = 0.3,
) -> List[FreefallSegment]:
    """Maximal contiguous runs with |accel| below accel_thresh for at least
    min_len seconds. Segments whose mean |gyro| falls below gyro_thresh
    (when positive) are dropped as spinless."""
    anorm = np.linalg.norm(np.asarray(log.accel, dtype=float), axis=1)
    mask = anorm < accel_thresh
    min_samples = int(round(min_len * log.rate))
    segments = []
    i = 0
    n = len(mask)
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j < n and mask[j]:
            j += 1
        if j - i >= min_samples:
            gmean = float(np.mean(np.linalg.norm(log.gyro[i:j], axis=1)))
            if gyro_thresh <= 0.0 or gmean >= gyro_thresh:
                segments.append(
                    FreefallSegment(
                        start=i,
                        stop=j,
                        t_start=float(log.t[i]),
                        t_stop=float(log.t[j - 1] + 1.0 / log.rate),
                        mean_gyro_norm=gmean,
                    )
                )
        i = j
    return segments


def rows_from_segment(
    log,
    start: int,
    stop: int,
    cutoff_hz: float = 30.0,
    trim_start_s: Optional[float] = None,
    trim_end_samples: int = 2,
) -> List[RegressorRow]:
    """Regressor rows for one free-tumble segment.

    The raw rows are linear in the constant offset sample by sample, so
    every channel (all 9 regressor entries and the 3 observations) passes
    through the same causal low-pass; this keeps the relation exact while
    rejecting noise. The filter warm-up at the segment head and the
    one-sided differences at the tail are trimmed.
    """
    dt = 1.0 / log.rate
    gyro = np.asarray(log.gyro[start:stop], dtype=float)
    accel = np.asarray(log.accel[start:stop], dtype=float)
    omega_dot = central_difference(gyro, dt)
    X = lever_arm_matrices(gyro, omega_dot)
    channels = np.hstack([X.reshape(len(X), 9), accel])
    filt = lowpass(channels, dt, cutoff_hz)
    if trim_start_s is None:
        trim_start_s = 3.0 / cutoff_hz
    lo = int(round(trim_start_s * log.rate))
    hi = len(filt) - trim_end_samples
    if hi - lo < 4:
        raise InsufficientExcitationError(
            "free-tumble segment too short after filter warm-up trim"
        )
    return [
        RegressorRow(X=filt[k, :9].reshape(3, 3), y=filt[k, 9:12].copy())
        for k in range(lo, hi)
    ]


def accumulators_from_logs(
    logs: Sequence,
    segmentation: str = "auto",
    cutoff_hz: float = 30.0,
    accel_thresh: float = 1.5,
    gyro_thresh: float = 0.0,
    min_len: float = 0.3,
) -> Tuple[List[OffsetAccumulator], List[FreefallSegment]]:
    """Per-segment accumulators across one or more logs (merge with sum)."""
    accs: List[OffsetAccumulator] = []
    segs: List[FreefallSegment] = []
    for log in logs:
        if segmentation == "auto":
            found = detect_freefall_segments(log, accel_thresh, gyro_thresh, min_len)
        elif segmentation == "full":
            anorm = np.linalg.norm(log.accel, axis=1)
            if np.mean(anorm < accel_thresh) < 0.95:
                raise CalibrationError(
                    "log is not free-fall (accel magnitude above "
                    f"{accel_thresh} m/s^2); cannot use --segment full"
                )
            found = [
                FreefallSegment(
                    0,
                    len(log.t),
                    float(log.t[0]),
                    float(log.t[-1] + 1.0 / log.rate),
                    float(np.mean(np.linalg.norm(log.gyro, axis=1))),
                )
            ]
        else:
            raise ValueError("segmentation must be 'auto' or 'full'")
        if not found and segmentation == "auto":
            continue
        for seg in found:
            rows = rows_from_segment(log, seg.start, seg.stop, cutoff_hz)
            accs.append(accumulate(rows))
            segs.append(seg)
    return accs, segs


def rows_from_logs(
    logs: Sequence,
    segmentation: str = "auto",
    cutoff_hz: float = 30.0,
    accel_thresh: float = 1.5,
    gyro_thresh: float = 0.0,
    min_len: float = 0.3,
) -> List[RegressorRow]:
    """All free-tumble regressor rows across logs, in stream order (for the
    RLS form; the batch path goes through accumulators_from_logs)."""
    rows: List[RegressorRow] = []
    for log in logs:
        if segmentation == "auto":
            found = detect_freefall_segments(log, accel_thresh, gyro_thresh, min_len)
        else:
            found = [FreefallSegment(0, len(log.t), float(log.t[0]), float(log.t[-1]), 0.0)]
        for seg in found:
            rows.extend(rows_from_segment(log, seg.start, seg.stop, cutoff_hz))
    return rows


def estimate_from_logs(
    logs: Sequence,
    segmentation: str = "auto",
    cutoff_hz: float = 30.0,
    accel_thresh: float = 1.5,
    gyro_thresh: float = 0.0,
    min_len: float = 0.3,
    cond_cap: float = 1e10,
) -> Tuple[OffsetEstimate, List[FreefallSegment]]:
    """Detect throws across logs, accumulate, and solve by batch LS."""
    accs, segs = accumulators_from_logs(
        logs, segmentation, cutoff_hz, accel_thresh, gyro_thresh, min_len
    )
    if not accs:
        raise CalibrationError("no free-fall segments detected in the given logs")
    total = accs[0]
    for acc in accs[1:]:
        total = total + acc
    return solve_ls(total, cond_cap=cond_cap), segs
