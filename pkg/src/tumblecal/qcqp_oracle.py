"""Slow, trustworthy reference solvers used to certify the thrust-frame
algorithm: a cyclic-Jacobi eigendecomposition and a multi-start projected
gradient method for the full input-norm minimization under the zero-torque
and gravity-norm constraints. Test/CLI use only; never on the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effectiveness import EffectivenessModel
from .thrust_frame import nullspace_basis


@dataclass
class OracleSolution:
    u: np.ndarray
    objective: float  # u^T W u at the returned point
    feasible: bool
    kkt_residual: float


def oracle_eig(A, tol: float = 1e-13, max_sweeps: int = 60):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi
    rotations. Returns (eigenvalues descending, eigenvectors as columns).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    scale = max(1.0, np.max(np.abs(A)))
    if np.max(np.abs(A - A.T)) > 1e-9 * scale:
        raise ValueError("A must be symmetric within 1e-9")
    n = A.shape[0]
    M = 0.5 * (A + A.T)
    V = np.eye(n)
    if n == 1:
        return M[0, :1].copy(), V
    fro = np.linalg.norm(M)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(M * M) - np.sum(np.diag(M) ** 2), 0.0))
        if off <= tol * max(fro, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = M[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (M[q, q] - M[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(1.0 + theta * theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                J = np.array([[c, s], [-s, c]])
                M[:, [p, q]] = M[:, [p, q]] @ J
                M[[p, q], :] = J.T @ M[[p, q], :]
                M[p, q] = M[q, p] = 0.0
                V[:, [p, q]] = V[:, [p, q]] @ J
    w = np.diag(M).copy()
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def _retract(eta, A, g):
    """Scale rows of eta back onto the constraint surface eta^T A eta = g^2."""
    q = np.einsum("sn,nk,sk->s", eta, A, eta)
    good = q > 0.0
    scale = np.ones_like(q)
    scale[good] = g / np.sqrt(q[good])
    return eta * scale[:, None], good


def oracle_solve(
    model: EffectivenessModel,
    g: float = 9.81,
    W=None,
    n_starts: int = 64,
    max_iters: int = 500,
    seed: int = 0,
    tol: float = 1e-12,
) -> OracleSolution:
    """Multi-start projected gradient descent on the reduced problem.

    Starts are sampled in the torque nullspace (same basis as the fast
    solver), projected onto the thrust-norm ellipsoid, and descended on
    the weighted input norm with tangent-space gradient steps plus
    re-projection; bound-violating local optima are rejected. Best-of
    semantics over starts: the first k starts of a larger run are exactly
    the starts of a smaller run with the same seed.
    """
    m = model.m
    W = np.ones(m) if W is None else np.asarray(W, dtype=float)
    N = nullspace_basis(model.G1tau).N_tau
    n = N.shape[1]
    A = N.T @ (model.G1f.T @ model.G1f) @ N
    A = 0.5 * (A + A.T)
    H = N.T @ (W[:, None] * N)
    H = 0.5 * (H + H.T)

    infeasible = OracleSolution(
        u=np.zeros(m), objective=np.inf, feasible=False, kkt_residual=np.inf
    )
    if np.max(np.abs(A)) <= 1e-30:
        return infeasible  # no thrust reachable in the nullspace at all

    rng = np.random.default_rng(seed)
    starts = []
    attempts = 0
    while len(starts) < n_starts and attempts < 20 * n_starts:
        attempts += 1
        w0 = rng.standard_normal(n)
        w0 /= np.linalg.norm(w0)
        if w0 @ A @ w0 > 1e-12 * np.trace(A) / n:
            starts.append(w0)
    if not starts:
        return infeasible
    eta = np.vstack(starts)
    eta, _ = _retract(eta, A, g)

    active = np.ones(len(eta), dtype=bool)
    for _ in range(max_iters):
        if not np.any(active):
            break
        grad = 2.0 * eta @ H
        Ae = eta @ A
        nrm = np.linalg.norm(Ae, axis=1, keepdims=True)
        nhat = Ae / np.maximum(nrm, 1e-300)
        gt = grad - np.sum(grad * nhat, axis=1, keepdims=True) * nhat
        gnorm = np.linalg.norm(gt, axis=1)
        obj = np.einsum("sn,nk,sk->s", eta, H, eta)
        still = gnorm > tol * np.maximum(1.0, np.linalg.norm(grad, axis=1))
        active &= still
        if not np.any(active):
            break
        # backtracking line search on the constraint surface, per start
        alpha = np.where(active, np.linalg.norm(eta, axis=1) / np.maximum(gnorm, 1e-300), 0.0)
        improved = ~active
        for _ in range(40):
            cand = eta - alpha[:, None] * gt
            cand, ok = _retract(cand, A, g)
            cobj = np.einsum("sn,nk,sk->s", cand, H, cand)
            accept = active & ~improved & ok & (cobj <= obj - 1e-4 * alpha * gnorm**2)
            eta[accept] = cand[accept]
            improved |= accept
            if np.all(improved):
                break
            alpha = np.where(improved, alpha, alpha * 0.5)
        active &= improved

    # evaluate candidates in input space, both signs, keep best feasible
    U = eta @ N.T
    best = None
    for sign in (1.0, -1.0):
        for u in sign * U:
            if np.all(u >= model.u_min - 1e-9) and np.all(u <= model.u_max + 1e-9):
                obj = float(u @ (W * u))
                if best is None or obj < best[0]:
                    best = (obj, u)
    if best is None:
        return infeasible

    obj, u = best
    eta_best = N.T @ u
    He = H @ eta_best
    Ae = A @ eta_best
    denom = float(Ae @ Ae)
    mu = float(He @ Ae) / denom if denom > 0 else 0.0
    kkt = 2.0 * np.linalg.norm(He - mu * Ae) / max(1.0, 2.0 * np.linalg.norm(He))
    return OracleSolution(u=u, objective=obj, feasible=True, kkt_residual=float(kkt))
