"""Microbenchmark for the thrust-frame solver, broken down by stage:
the pivoted QR nullspace extraction, the reduced-matrix products, and a
fixed power-iteration budget (the real-time usage pattern). Medians over
many repetitions with the first tenth discarded as warm-up, measured on
the monotonic clock.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .effectiveness import EffectivenessModel
from .thrust_frame import _build_reduced, _power_kernel, nullspace_basis, solve


def random_hoverable_model(
    m: int, rng: np.random.Generator, g: float = 9.81, bound_margin: float = 1.25
) -> EffectivenessModel:
    """Random effectiveness matrices for which the optimal torque-free
    input is strictly interior to symmetric bounds (hence hoverable)."""
    while True:
        G1tau = rng.standard_normal((3, m))
        s = np.linalg.svd(G1tau, compute_uv=False)
        if s[2] > 1e-3 * s[0]:
            break
    G1f = rng.standard_normal((3, m)) * (g / 2.0)
    N = nullspace_basis(G1tau).N_tau
    A = N.T @ (G1f.T @ G1f) @ N
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    u_opt = N @ ((g / np.sqrt(w[-1])) * V[:, -1])
    bound = bound_margin * np.max(np.abs(u_opt))
    return EffectivenessModel(G1f=G1f, G1tau=G1tau, u_min=-bound, u_max=bound)


@dataclass
class StageTiming:
    m: int
    qr_med_us: float
    qr_p95_us: float
    products_med_us: float
    products_p95_us: float
    power_med_us: float
    power_p95_us: float
    post_qr_med_us: float  # products + power, per repetition
    solve_med_us: float  # full solve() with default settings
    solve_p95_us: float


def _percentiles(samples_ns) -> tuple:
    arr = np.asarray(samples_ns, dtype=float) / 1e3
    return float(np.median(arr)), float(np.percentile(arr, 95))


def bench_frame(
    motor_counts: Sequence[int],
    iters: int = 1000,
    seed: int = 0,
    power_budget: int = 100,
    g: float = 9.81,
) -> List[StageTiming]:
    """Time each solver stage over a sweep of motor counts."""
    rng = np.random.default_rng(seed)
    results = []
    for m in motor_counts:
        model = random_hoverable_model(m, rng, g=g)
        G1f = np.ascontiguousarray(model.G1f)
        warmup = max(1, iters // 10)
        qr_ns, prod_ns, pow_ns, post_ns, solve_ns = [], [], [], [], []
        for it in range(warmup + iters):
            t0 = time.perf_counter_ns()
            basis = nullspace_basis(model.G1tau)
            t1 = time.perf_counter_ns()
            A = _build_reduced(G1f, basis.N_tau)
            t2 = time.perf_counter_ns()
            v = np.full(A.shape[0], 1.0 / np.sqrt(A.shape[0]))
            _power_kernel(A, v, power_budget, 0.0)
            t3 = time.perf_counter_ns()
            if it >= warmup:
                qr_ns.append(t1 - t0)
                prod_ns.append(t2 - t1)
                pow_ns.append(t3 - t2)
                post_ns.append(t3 - t1)
        for it in range(warmup + iters):
            t0 = time.perf_counter_ns()
            solve(model, g=g)
            t1 = time.perf_counter_ns()
            if it >= warmup:
                solve_ns.append(t1 - t0)
        qr = _percentiles(qr_ns)
        prod = _percentiles(prod_ns)
        pw = _percentiles(pow_ns)
        post = _percentiles(post_ns)
        sv = _percentiles(solve_ns)
        results.append(
            StageTiming(
                m=m,
                qr_med_us=qr[0],
                qr_p95_us=qr[1],
                products_med_us=prod[0],
                products_p95_us=prod[1],
                power_med_us=pw[0],
                power_p95_us=pw[1],
                post_qr_med_us=post[0],
                solve_med_us=sv[0],
                solve_p95_us=sv[1],
            )
        )
    return results


_COLUMNS = [
    ("m", "m"),
    ("qr_med_us", "qr_med"),
    ("qr_p95_us", "qr_p95"),
    ("products_med_us", "prod_med"),
    ("products_p95_us", "prod_p95"),
    ("power_med_us", "power_med"),
    ("power_p95_us", "power_p95"),
    ("post_qr_med_us", "post_qr_med"),
    ("solve_med_us", "solve_med"),
    ("solve_p95_us", "solve_p95"),
]


def format_table(rows: List[StageTiming], fmt: str = "markdown") -> str:
    """Render timings (microseconds) as a markdown or CSV table."""
    if fmt == "csv":
        lines = [",".join(label for _, label in _COLUMNS)]
        for r in rows:
            cells = [f"{r.m}"] + [f"{getattr(r, attr):.3f}" for attr, _ in _COLUMNS[1:]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        header = "| " + " | ".join(label for _, label in _COLUMNS) + " |"
        sep = "|" + "|".join("---" for _ in _COLUMNS) + "|"
        lines = [header, sep]
        for r in rows:
            cells = [f"{r.m}"] + [f"{getattr(r, attr):.1f}" for attr, _ in _COLUMNS[1:]]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError("fmt must be 'markdown' or 'csv'")
