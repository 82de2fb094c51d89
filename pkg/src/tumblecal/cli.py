"""Command-line pipeline: simulate logs, estimate the IMU offset, identify
effectiveness, solve the thrust frame, cross-check against the oracle, and
benchmark the solver.

Exit codes: 0 success, 1 usage error, 2 data/numerical error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench as bench_mod
from . import effectiveness, imu_offset, logio, qcqp_oracle, sim, thrust_frame
from .errors import CalibrationError, ConfigError
from .geometry import EulerYPR, euler_to_quat


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; usage errors are 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_vec3(text: str, flag: str) -> np.ndarray:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{flag}: expected three comma-separated numbers, got {text!r}")
    if len(parts) != 3:
        raise ConfigError(f"{flag}: expected three comma-separated numbers, got {text!r}")
    return np.asarray(parts)


def _parse_motor_range(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _build_vehicle(args) -> sim.VehicleConfig:
    if args.config:
        return logio.load_vehicle_config(args.config)
    imu_offset_v = _parse_vec3(args.imu_offset, "--imu-offset")
    if args.preset == "quad":
        q = None
        if args.imu_rotation_ypr:
            ypr = _parse_vec3(args.imu_rotation_ypr, "--imu-rotation-ypr")
            q = euler_to_quat(EulerYPR(*ypr))
        return sim.preset_quadrotor(imu_rotation=q, imu_offset=imu_offset_v)
    if args.preset == "hex":
        return sim.preset_hexarotor(
            constellation_roll_deg=args.constellation_roll, imu_offset=imu_offset_v
        )
    raise ConfigError(f"--preset: unknown preset {args.preset!r}")


def _noise(args):
    if args.noise_gyro == 0.0 and args.noise_accel == 0.0:
        return None
    return (args.noise_gyro, args.noise_accel)


def _schedule(name: str):
    if name == "quad_default":
        return sim.quad_excitation_schedule()
    if name == "hex_default":
        return sim.hex_excitation_schedule()
    raise ConfigError(f"--schedule: unknown schedule {name!r}")


def _cmd_sim(args) -> int:
    config = _build_vehicle(args)
    if args.scenario == "throw":
        scenario = sim.Throw(
            omega0_deg=_parse_vec3(args.omega0, "--omega0"),
            duration=args.duration,
            lead_in=args.lead_in,
            catch_time=args.catch_time,
            tail=args.tail,
        )
    elif args.scenario == "excite":
        scenario = sim.Excite(
            pulses=_schedule(args.schedule),
            omega0_deg=_parse_vec3(args.omega0, "--omega0"),
            duration=args.duration,
        )
    else:
        scenario = sim.Rest(duration=args.duration if args.duration else 1.0)
    log, truth = sim.simulate(
        config, scenario, rate=args.rate, noise=_noise(args), seed=args.seed
    )
    logio.write_sensor_log(args.output, log)
    truth_path = args.truth or (
        args.output[:-4] + ".truth.json" if args.output.endswith(".csv") else args.output + ".truth.json"
    )
    logio.write_ground_truth(truth_path, truth)
    print(f"wrote {len(log)} samples at {log.rate:g} Hz to {args.output}")
    print(f"wrote ground truth to {truth_path}")
    return 0


def _cmd_estimate_offset(args) -> int:
    logs = [logio.read_sensor_log(p) for p in args.logs]
    est, segs = imu_offset.estimate_from_logs(
        logs,
        segmentation=args.segment,
        cutoff_hz=args.cutoff,
        accel_thresh=args.accel_thresh,
        gyro_thresh=args.gyro_thresh,
        min_len=args.min_len,
        cond_cap=args.cond_cap,
    )
    ell = imu_offset.confidence_ellipsoid(est, 0.95)
    for i, seg in enumerate(segs):
        print(
            f"segment {i}: t = [{seg.t_start:.3f}, {seg.t_stop:.3f}] s, "
            f"mean |omega| = {seg.mean_gyro_norm:.2f} rad/s"
        )
    print(f"r_hat [mm]: {1e3 * est.r_hat[0]:+.4f}, {1e3 * est.r_hat[1]:+.4f}, {1e3 * est.r_hat[2]:+.4f}")
    print(f"95% semi-axes [mm]: " + ", ".join(f"{1e3 * s:.4f}" for s in ell.semi_axes))
    print(f"condition number of X'X: {est.condition_number:.3g}")
    ratio = ell.semi_axes[0] / max(ell.semi_axes[-1], 1e-300)
    if ratio > 100.0:
        d = ell.axes_dirs[0]
        print(
            "warning: weak excitation along "
            f"[{d[0]:+.3f}, {d[1]:+.3f}, {d[2]:+.3f}] "
            f"(semi-axis ratio {ratio:.0f}); throw again with spin about a different axis"
        )
    if args.output:
        logio.write_offset_estimate(args.output, est, ell)
        print(f"wrote {args.output}")
    return 0


def _cmd_identify_g1(args) -> int:
    log = logio.read_sensor_log(args.log)
    est = logio.read_offset_estimate(args.offset)
    model = effectiveness.fit_from_log(
        log,
        est.r_hat,
        cutoff_hz=args.cutoff,
        settle_s=args.settle,
        forgetting=args.forgetting,
    )
    print(f"identified {model.m}-motor effectiveness")
    print("G1f (m/s^2 per unit input):")
    print(np.array_str(model.G1f, precision=4, suppress_small=True))
    print("G1tau (rad/s^2 per unit input):")
    print(np.array_str(model.G1tau, precision=2, suppress_small=True))
    if args.output:
        logio.write_effectiveness_model(args.output, model)
        print(f"wrote {args.output}")
    return 0


def _print_solution(sol: thrust_frame.ThrustFrameSolution) -> None:
    e = sol.euler_ypr_deg
    print(f"u* = {np.array_str(sol.u_star, precision=4)}")
    print(f"d  = {np.array_str(sol.d, precision=4)} m/s^2")
    print(
        f"q_TU = {sol.q_TU[0]:+.4f} {sol.q_TU[1]:+.4f}i {sol.q_TU[2]:+.4f}j {sol.q_TU[3]:+.4f}k"
        f"  (yaw {e.yaw:+.2f} deg, pitch {e.pitch:+.2f} deg, roll {e.roll:+.2f} deg)"
    )
    print(f"lambda = {sol.lam:.6g}, iterations = {sol.iterations_used}, converged = {sol.converged}")


def _cmd_frame_solve(args) -> int:
    if args.watch:
        if not (args.log and args.offset):
            raise ConfigError("--watch requires --log and --offset")
        log = logio.read_sensor_log(args.log)
        est = logio.read_offset_estimate(args.offset)
        tracker = thrust_frame.ThrustFrameTracker()
        sol = None
        stride = max(1, int(round(args.stride_ms * 1e-3 * log.rate)))
        for t, model in effectiveness.replay_fit(log, est.r_hat, stride=stride):
            try:
                sol = tracker.update(model, budget_iters=args.budget)
            except CalibrationError:
                continue  # model not yet identifiable (early in the sequence)
            e = sol.euler_ypr_deg
            print(
                f"t={t:7.3f}s  yaw {e.yaw:+7.2f}  pitch {e.pitch:+7.2f}  "
                f"roll {e.roll:+7.2f}  lambda {sol.lam:10.4g}"
            )
        if sol is None:
            raise CalibrationError("replay never reached an identifiable model")
    else:
        if not args.g1:
            raise ConfigError("frame solve requires --g1 (or --watch with --log/--offset)")
        model = logio.read_effectiveness_model(args.g1)
        sol = thrust_frame.solve(model, g=args.g, max_iters=args.max_iters)
        _print_solution(sol)
    if args.output:
        logio.write_thrust_frame_solution(args.output, sol)
        print(f"wrote {args.output}")
    return 0


def _cmd_oracle_solve(args) -> int:
    model = logio.read_effectiveness_model(args.g1)
    sol = qcqp_oracle.oracle_solve(model, g=args.g, n_starts=args.starts, seed=args.seed)
    print(f"feasible = {sol.feasible}")
    if sol.feasible:
        print(f"u = {np.array_str(sol.u, precision=5)}")
        print(f"objective = {sol.objective:.9g}, kkt residual = {sol.kkt_residual:.3g}")
    if args.output:
        logio.write_oracle_solution(args.output, sol)
        print(f"wrote {args.output}")
    return 0


def _cmd_bench_frame(args) -> int:
    motors = _parse_motor_range(args.motors)
    rows = bench_mod.bench_frame(motors, iters=args.iters, seed=args.seed)
    table = bench_mod.format_table(rows, fmt=args.format)
    if args.output:
        logio.atomic_write_text(args.output, table)
        print(f"wrote {args.output}")
    else:
        print(table, end="")
    return 0


def _add_vehicle_flags(p):
    p.add_argument("--config", help="vehicle config JSON (overrides --preset)")
    p.add_argument("--preset", default="quad", choices=["quad", "hex"])
    p.add_argument("--imu-rotation-ypr", help="IMU rotation as 'yaw,pitch,roll' deg (quad preset)")
    p.add_argument("--imu-offset", default="0,0,0", help="IMU offset 'x,y,z' in m")
    p.add_argument("--constellation-roll", type=float, default=45.0, help="hex preset roll, deg")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tumblecal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="simulate sensor logs", parents=[])
    p_sim.add_argument("scenario", choices=["throw", "excite", "rest"])
    _add_vehicle_flags(p_sim)
    p_sim.add_argument("--omega0", default="400,400,100", help="initial spin 'x,y,z' deg/s")
    p_sim.add_argument("--duration", type=float, default=None, help="scenario duration, s")
    p_sim.add_argument("--lead-in", type=float, default=0.25)
    p_sim.add_argument("--catch-time", type=float, default=0.2)
    p_sim.add_argument("--tail", type=float, default=0.25)
    p_sim.add_argument("--schedule", default="quad_default")
    p_sim.add_argument("--rate", type=float, default=2000.0)
    p_sim.add_argument("--noise-gyro", type=float, default=0.0, help="rad/s")
    p_sim.add_argument("--noise-accel", type=float, default=0.0, help="m/s^2")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("-o", "--output", required=True, help="output CSV path")
    p_sim.add_argument("--truth", help="ground-truth JSON path (default: <output>.truth.json)")
    p_sim.set_defaults(func=_cmd_sim, needs_duration_default=True)

    p_est = sub.add_parser("estimate", help="estimation stages")
    est_sub = p_est.add_subparsers(dest="what", required=True)
    p_off = est_sub.add_parser("offset", help="IMU offset from throw logs")
    p_off.add_argument("--logs", nargs="+", required=True)
    p_off.add_argument("--segment", default="auto", choices=["auto", "full"])
    p_off.add_argument("--cutoff", type=float, default=30.0, help="low-pass cutoff, Hz")
    p_off.add_argument("--accel-thresh", type=float, default=1.5)
    p_off.add_argument("--gyro-thresh", type=float, default=0.0)
    p_off.add_argument("--min-len", type=float, default=0.3)
    p_off.add_argument("--cond-cap", type=float, default=1e10)
    p_off.add_argument("-o", "--output")
    p_off.set_defaults(func=_cmd_estimate_offset)

    p_id = sub.add_parser("identify", help="identification stages")
    id_sub = p_id.add_subparsers(dest="what", required=True)
    p_g1 = id_sub.add_parser("g1", help="effectiveness matrices from an excitation log")
    p_g1.add_argument("--log", required=True)
    p_g1.add_argument("--offset", required=True, help="offset estimate JSON")
    p_g1.add_argument("--cutoff", type=float, default=30.0)
    p_g1.add_argument("--settle", type=float, default=0.04)
    p_g1.add_argument("--forgetting", type=float, default=0.999)
    p_g1.add_argument("-o", "--output")
    p_g1.set_defaults(func=_cmd_identify_g1)

    p_frame = sub.add_parser("frame", help="thrust frame")
    frame_sub = p_frame.add_subparsers(dest="what", required=True)
    p_fs = frame_sub.add_parser("solve", help="optimal moment-free thrust frame")
    p_fs.add_argument("--g1", help="effectiveness model JSON")
    p_fs.add_argument("--g", type=float, default=9.81)
    p_fs.add_argument("--max-iters", type=int, default=100)
    p_fs.add_argument("--watch", action="store_true", help="replay incremental solving over a log")
    p_fs.add_argument("--log", help="excitation log (with --watch)")
    p_fs.add_argument("--offset", help="offset estimate JSON (with --watch)")
    p_fs.add_argument("--stride-ms", type=float, default=10.0)
    p_fs.add_argument("--budget", type=int, default=3)
    p_fs.add_argument("-o", "--output")
    p_fs.set_defaults(func=_cmd_frame_solve)

    p_oracle = sub.add_parser("oracle", help="reference solver")
    oracle_sub = p_oracle.add_subparsers(dest="what", required=True)
    p_os = oracle_sub.add_parser("solve", help="brute-force solve of the hover input problem")
    p_os.add_argument("--g1", required=True)
    p_os.add_argument("--g", type=float, default=9.81)
    p_os.add_argument("--starts", type=int, default=64)
    p_os.add_argument("--seed", type=int, default=0)
    p_os.add_argument("-o", "--output")
    p_os.set_defaults(func=_cmd_oracle_solve)

    p_bench = sub.add_parser("bench", help="benchmarks")
    bench_sub = p_bench.add_subparsers(dest="what", required=True)
    p_bf = bench_sub.add_parser("frame", help="solver stage timings vs motor count")
    p_bf.add_argument("--motors", default="4..32", help="range '4..32' or list '4,8,16'")
    p_bf.add_argument("--iters", type=int, default=1000)
    p_bf.add_argument("--seed", type=int, default=0)
    p_bf.add_argument("--format", default="markdown", choices=["markdown", "csv"])
    p_bf.add_argument("-o", "--output")
    p_bf.set_defaults(func=_cmd_bench_frame)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if getattr(args, "needs_duration_default", False) and args.duration is None:
        args.duration = {"throw": 0.9, "rest": 1.0, "excite": None}[args.scenario]
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tumblecal: config error: {exc}", file=sys.stderr)
        return 2
    except CalibrationError as exc:
        print(f"tumblecal: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tumblecal: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
