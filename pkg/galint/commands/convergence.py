"""
convergence 命令：各格式、各步长下的轨迹误差 (1/T)∫‖q(t) − q_d(t)‖dt。

参考轨迹 q_d 由 lobatto:3 在 --benchmark-dt 上积分得到；积分用端点采样的梯形公式。
"""

import argparse
import logging
from typing import List, Tuple

import numpy as np
from scipy.integrate import trapezoid

from ..errors import GalintError
from ..galerkin import GalerkinScheme, lobatto
from ..newton import SolverConfig, rollout
from .common import (
    EXIT_FAILURE,
    EXIT_OK,
    UsageError,
    build_model,
    build_scheme,
    check_time_grid,
    format_float,
    make_command_result,
    parse_float_list,
    parse_name_list,
    sample_initial_state,
    write_csv,
)

logger = logging.getLogger(__name__)

HEADER = ["scheme", "dt", "traj_error"]
BENCHMARK_ORDER = 3


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("convergence", help="trajectory error versus time step")
    parser.add_argument("--schemes", default="trapezoidal,simpson")
    parser.add_argument("--dts", default="0.04,0.02,0.01,0.005")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--model", help="JSON mechanism description")
    source.add_argument("--chain", type=int, default=None, help="n-link pendulum chain (default 2)")
    parser.add_argument("--horizon", type=float, default=2.0)
    parser.add_argument("--benchmark-dt", type=float, default=5e-4)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--q-range", type=float, default=np.pi / 2)
    parser.add_argument("--qdot-range", type=float, default=0.0)
    parser.add_argument("--out", help="CSV path (default: stdout)")
    parser.set_defaults(handler=run)
    return parser


def trajectory(model, scheme: GalerkinScheme, state, dt: float, steps: int, config) -> np.ndarray:
    """q(kΔt)，k = 0..steps，形状 (steps+1, n)。"""
    states, _ = rollout(model, scheme, state, steps, dt=dt, config=config)
    return np.array([s.q for s in states])


def trajectory_error(q: np.ndarray, q_ref: np.ndarray, dt: float) -> float:
    """(1/T)∫‖q − q_ref‖dt，两条轨迹在相同时刻采样。"""
    err = np.linalg.norm(q - q_ref, axis=1)
    horizon = dt * (len(err) - 1)
    return float(trapezoid(err, dx=dt) / horizon)


def _stride(dt: float, benchmark_dt: float) -> int:
    ratio = dt / benchmark_dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-9 * max(1.0, ratio):
        raise UsageError(f"dt={dt} must be an integer multiple of --benchmark-dt={benchmark_dt}")
    return stride


def run(args) -> Tuple[int, str]:
    model = build_model(args.model, args.chain)
    schemes = [build_scheme(name) for name in parse_name_list(args.schemes)]
    dts = parse_float_list(args.dts)
    bench_steps = check_time_grid(args.benchmark_dt, args.horizon)
    for dt in dts:
        check_time_grid(dt, args.horizon)
        _stride(dt, args.benchmark_dt)
    config = SolverConfig.from_settings()
    state = sample_initial_state(model, np.random.default_rng(args.seed), args.q_range, args.qdot_range)

    logger.info(f"[CONVERGENCE] Benchmark lobatto:{BENCHMARK_ORDER} dt={args.benchmark_dt} steps={bench_steps}")
    try:
        q_ref = trajectory(model, lobatto(BENCHMARK_ORDER), state, args.benchmark_dt, bench_steps, config)
    except GalintError as e:
        logger.error(f"[CONVERGENCE] Benchmark trajectory failed: {e}")
        return EXIT_FAILURE, make_command_result("convergence", False, error=f"benchmark failed: {e}")

    rows: List[List[str]] = []
    failures = []
    for scheme in schemes:
        for dt in dts:
            stride = _stride(dt, args.benchmark_dt)
            steps = (len(q_ref) - 1) // stride
            try:
                q = trajectory(model, scheme, state, dt, steps, config)
            except GalintError as e:
                logger.warning(f"[CONVERGENCE] {scheme.name} dt={dt} failed: {e}")
                failures.append({"scheme": scheme.name, "dt": dt, "error": str(e)})
                continue
            error = trajectory_error(q, q_ref[::stride][: steps + 1], dt)
            logger.info(f"[CONVERGENCE] {scheme.name} dt={dt} error={error:.3e}")
            rows.append([scheme.name, format_float(dt), format_float(error)])

    write_csv(args.out, HEADER, rows)
    data = {"schemes": [s.name for s in schemes], "dts": dts, "out": args.out}
    if failures:
        return EXIT_FAILURE, make_command_result("convergence", False, data=data,
                                                 error=f"{len(failures)} run(s) failed",
                                                 extra={"failures": failures})
    return EXIT_OK, make_command_result("convergence", True, data=data,
                                        message=f"measured {len(rows)} trajectory error(s)")


__all__ = ["HEADER", "add_parser", "run", "trajectory", "trajectory_error"]
