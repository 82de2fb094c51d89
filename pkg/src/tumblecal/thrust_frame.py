"""Moment-free optimal thrust direction and IMU-to-thrust-frame rotation.

Minimizes ||u||^2 subject to zero net torque and ||G1f u|| = g by reducing
onto an orthonormal basis of the torque nullspace (column-pivoted QR),
where the problem becomes a dominant-eigenpair computation solved by power
iteration. The thrust frame quaternion is the shortest rotation taking the
resulting thrust direction to (0, 0, -g).

The post-QR numeric path (reduced-matrix build, power iteration, input
assembly) is JIT-compiled so its cost tracks the algorithm's flop count
rather than interpreter overhead; it is the part whose cost grows with
the square of the nullspace dimension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit
from scipy import linalg

from .effectiveness import EffectivenessModel
from .errors import (
    DegenerateTorqueModelError,
    HoverInfeasibleError,
    NoThrustAuthorityError,
)
from .geometry import quat_canonical, quat_to_euler, shortest_rotation

GRAVITY = 9.81

BOUND_SLACK = 1e-9  # absolute slack so boundary-grazing solutions survive round-off


@dataclass
class NullspaceBasis:
    """Orthonormal basis of the torque nullspace, (m, m-3).

    rank_check is the smallest retained R-diagonal magnitude of the
    pivoted QR; small values signal a nearly rank-deficient G1tau.
    """

    N_tau: np.ndarray
    rank_check: float


@dataclass
class ThrustFrameSolution:
    u_star: np.ndarray  # motor inputs, dimensionless
    d: np.ndarray  # thrust direction, m/s^2, with ||d|| = g
    lam: float  # dominant eigenvalue of the reduced quadratic
    q_TU: np.ndarray  # shortest rotation mapping d to (0, 0, -g)
    iterations_used: int
    converged: bool
    eta_dir: np.ndarray  # unit eigenvector in nullspace coordinates (warm-start seed)

    @property
    def euler_ypr_deg(self):
        return quat_to_euler(self.q_TU)


class PowerResult(NamedTuple):
    value: float
    vector: np.ndarray
    converged: bool
    iterations: int


def nullspace_basis(G1tau, rank_tol: float = 1e-6) -> NullspaceBasis:
    """Orthonormal nullspace basis from a column-pivoted QR of G1tau^T."""
    Gt = np.asarray(G1tau, dtype=float)
    if Gt.ndim != 2 or Gt.shape[0] != 3:
        raise ValueError("G1tau must be 3 x m")
    m = Gt.shape[1]
    if m < 4:
        raise ValueError("need m >= 4 motors for a nonempty torque nullspace")
    Q, R, _ = linalg.qr(Gt.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(R[:3, :3]))
    if diag[0] == 0.0 or diag[2] < rank_tol * diag[0]:
        raise DegenerateTorqueModelError(
            f"torque effectiveness numerically rank-deficient "
            f"(diagonal ratio {0.0 if diag[0] == 0.0 else diag[2] / diag[0]:.2e})"
        )
    return NullspaceBasis(N_tau=np.ascontiguousarray(Q[:, 3:]), rank_check=float(diag[2]))


@njit(cache=True)
def _build_reduced(G1f, N):
    """A = N^T G1f^T G1f N, the reduced thrust quadratic."""
    B = G1f @ N
    return B.T @ B


@njit(cache=True)
def _power_kernel(A, v, max_iters, tol):
    """Power steps v <- Av/||Av|| with Rayleigh-quotient residual check.

    Returns (lam, iters_done, status): status 0 converged, 1 iteration
    limit, 2 degenerate iterate (||Av|| ~ 0, caller restarts).
    """
    fro = np.sqrt(np.sum(A * A))
    z = A @ v
    lam = v @ z
    # already-converged warm starts exit without perturbing v
    res = np.sqrt(np.sum((z - lam * v) ** 2))
    if lam > 0.0 and res <= tol * lam:
        return lam, 0, 0
    for it in range(max_iters):
        nz = np.sqrt(np.sum(z * z))
        if nz <= 1e-12 * fro:
            return lam, it, 2
        v[:] = z / nz
        z = A @ v
        lam = v @ z
        res = np.sqrt(np.sum((z - lam * v) ** 2))
        if lam > 0.0 and res <= tol * lam:
            return lam, it + 1, 0
    return lam, max_iters, 1


@njit(cache=True)
def _assemble_input(N, v, scale):
    return N @ (scale * v)


def _restart_vector(n: int, counter: int) -> np.ndarray:
    v = np.random.default_rng(counter).standard_normal(n)
    return v / np.linalg.norm(v)


def power_iteration(A, v0=None, max_iters: int = 100, tol: float = 1e-10) -> PowerResult:
    """Dominant eigenpair of a symmetric PSD matrix by power iteration.

    Non-convergence within max_iters is reported through the flag, not an
    error. A degenerate iterate (A v vanishing) restarts from a
    deterministic counter-seeded unit vector.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    scale = max(1.0, np.max(np.abs(A)))
    if np.max(np.abs(A - A.T)) > 1e-9 * scale:
        raise ValueError("A must be symmetric within 1e-9")
    A = np.ascontiguousarray(0.5 * (A + A.T))
    n = A.shape[0]
    if v0 is None:
        v = np.full(n, 1.0 / np.sqrt(n))
    else:
        v = np.asarray(v0, dtype=float).copy()
        v /= np.linalg.norm(v)

    iters_total = 0
    restarts = 0
    while True:
        lam, iters, status = _power_kernel(A, v, max_iters - iters_total, tol)
        iters_total += iters
        if status == 2 and iters_total < max_iters:
            restarts += 1
            v = _restart_vector(n, restarts)
            continue
        return PowerResult(float(lam), v, status == 0, iters_total)


def _select_sign(N_tau, v, scale, u_min, u_max):
    u = _assemble_input(N_tau, v, scale)
    for cand in (u, -u):
        if np.all(cand >= u_min - BOUND_SLACK) and np.all(cand <= u_max + BOUND_SLACK):
            break
    else:
        raise HoverInfeasibleError(
            "no sign of the torque-free input respects the actuator bounds; "
            "the vehicle is very likely not capable of static hover"
        )
    # both signs can pass when bounds straddle zero; prefer nonnegative total
    if np.all(-cand >= u_min - BOUND_SLACK) and np.all(-cand <= u_max + BOUND_SLACK):
        if np.sum(cand) < 0.0:
            cand = -cand
    return cand


def _finish(model, basis, g, lam, v, iters, converged):
    if lam <= 1e-12:
        raise NoThrustAuthorityError(
            "no thrust authority in the torque nullspace (lambda ~ 0)"
        )
    scale = g / np.sqrt(lam)
    u_star = _select_sign(basis.N_tau, v, scale, model.u_min, model.u_max)
    d = model.G1f @ u_star
    q = quat_canonical(shortest_rotation(d, np.array([0.0, 0.0, -g])))
    return ThrustFrameSolution(
        u_star=u_star,
        d=d,
        lam=float(lam),
        q_TU=q,
        iterations_used=iters,
        converged=converged,
        eta_dir=v.copy(),
    )


def solve(
    model: EffectivenessModel,
    g: float = GRAVITY,
    warm_start: Optional[ThrustFrameSolution] = None,
    max_iters: int = 100,
    tol: float = 1e-10,
) -> ThrustFrameSolution:
    """Batch solve for the optimal moment-free thrust input and frame."""
    if g <= 0.0:
        raise ValueError("g must be positive")
    basis = nullspace_basis(model.G1tau)
    A = _build_reduced(np.ascontiguousarray(model.G1f), basis.N_tau)
    v0 = None
    if warm_start is not None and warm_start.eta_dir.shape == (A.shape[0],):
        v0 = warm_start.eta_dir
    lam, v, converged, iters = power_iteration(A, v0=v0, max_iters=max_iters, tol=tol)
    return _finish(model, basis, g, lam, v, iters, converged)


class ThrustFrameTracker:
    """Incremental solver: a few power-iteration steps per call, reusing
    the previous eigenvector estimate as the model stream converges."""

    def __init__(self, g: float = GRAVITY, tol: float = 1e-10):
        self.g = g
        self.tol = tol
        self._v = None
        self._restarts = 0

    def update(self, model: EffectivenessModel, budget_iters: int = 3) -> ThrustFrameSolution:
        basis = nullspace_basis(model.G1tau)
        A = _build_reduced(np.ascontiguousarray(model.G1f), basis.N_tau)
        n = A.shape[0]
        if self._v is None or self._v.shape != (n,):
            self._v = np.full(n, 1.0 / np.sqrt(n))
        lam, iters, status = _power_kernel(A, self._v, budget_iters, self.tol)
        if status == 2:
            self._restarts += 1
            self._v = _restart_vector(n, self._restarts)
            lam, iters2, status = _power_kernel(A, self._v, max(0, budget_iters - iters), self.tol)
            iters += iters2
        return _finish(model, basis, self.g, lam, self._v, iters, status == 0)


def solve_incremental(
    state: ThrustFrameTracker, model: EffectivenessModel, budget_iters: int = 3
) -> ThrustFrameSolution:
    return state.update(model, budget_iters)
