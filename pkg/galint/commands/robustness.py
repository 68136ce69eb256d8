"""
robustness 命令：大步长下 Newton 的成功率与迭代次数。

对每个 Δt，从 [−π/2, π/2] 均匀采样 q⁰、q̇⁰，只做一个时间步，
统计成功次数与成功样本的迭代次数中位数。
"""

import argparse
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from ..errors import GalintError
from ..newton import SolverConfig, StepWorkspace, step
from ..settings import thread_count
from .common import (
    EXIT_OK,
    build_model,
    build_scheme,
    check_time_grid,
    format_float,
    make_command_result,
    parse_float_list,
    sample_initial_state,
    write_csv,
)

logger = logging.getLogger(__name__)

HEADER = ["dt", "samples", "successes", "success_rate", "median_iterations"]


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("robustness", help="Newton success rate versus time step")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--model", help="JSON mechanism description")
    source.add_argument("--chain", type=int, default=32)
    parser.add_argument("--scheme", default="trapezoidal")
    parser.add_argument("--dts", default="0.01,0.02,0.03,0.04,0.05,0.06")
    parser.add_argument("--samples", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="CSV path (default: stdout)")
    parser.set_defaults(handler=run)
    return parser


def _attempt(model, scheme, state, dt: float, config: SolverConfig) -> Optional[int]:
    """成功时返回迭代次数，失败返回 None。"""
    workspace = StepWorkspace.allocate(model.n, scheme.s)
    try:
        _, diag = step(model, scheme, state, dt=dt, config=config, workspace=workspace)
    except GalintError as e:
        logger.debug(f"[ROBUSTNESS] dt={dt} sample failed: {e}")
        return None
    return diag.iterations


def run(args) -> Tuple[int, str]:
    model = build_model(args.model, args.chain)
    scheme = build_scheme(args.scheme)
    dts = parse_float_list(args.dts)
    for dt in dts:
        check_time_grid(dt)
    samples = max(1, int(args.samples))
    config = SolverConfig.from_settings()
    rng = np.random.default_rng(args.seed)
    states = [sample_initial_state(model, rng) for _ in range(samples)]

    rows: List[List[str]] = []
    summary = []
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        for dt in dts:
            futures = [pool.submit(_attempt, model, scheme, st, dt, config) for st in states]
            iterations = [f.result() for f in futures]
            ok = [it for it in iterations if it is not None]
            rate = len(ok) / samples
            median = float(np.median(ok)) if ok else float("nan")
            logger.info(f"[ROBUSTNESS] dt={dt} success={len(ok)}/{samples} median_iter={median}")
            rows.append([format_float(dt), str(samples), str(len(ok)), format_float(rate), format_float(median)])
            summary.append({"dt": dt, "success_rate": rate})

    write_csv(args.out, HEADER, rows)
    return EXIT_OK, make_command_result("robustness", True, data={"n": model.n, "scheme": scheme.name,
                                                                  "results": summary, "out": args.out})


__all__ = ["HEADER", "add_parser", "run"]
