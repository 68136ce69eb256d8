"""
scaling 命令：对 n 连杆摆测量各操作的中位耗时（纳秒），输出 n,op,median_ns。

每个 n 先在主线程按种子采样全部试验状态，再交给线程池；每个任务有自己的工作区，
结果按输入顺序汇总后再写文件。
"""

import argparse
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Tuple

import numpy as np

from ..del_equations import DiscreteState, evaluate_del
from ..linearize import d2_discrete_lagrangian
from ..model import chain_model
from ..newton import StepWorkspace, newton_direction, warm_start
from ..oracle import dense_newton_direction, fd_del, fd_jacobian
from ..settings import thread_count
from .common import (
    EXIT_OK,
    build_scheme,
    check_time_grid,
    make_command_result,
    parse_int_list,
    sample_initial_state,
    write_csv,
)

logger = logging.getLogger(__name__)

HEADER = ["n", "op", "median_ns"]
FAST_OPS = ("evaluate_del", "newton_direction", "linearize")
ORACLE_OPS = ("oracle_del", "oracle_newton_direction")


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("scaling", help="time recursive and dense operations versus n")
    parser.add_argument("--n", default="8,16,32,64,128,256", help="comma-separated link counts")
    parser.add_argument("--scheme", default="simpson")
    parser.add_argument("--dt", type=float, default=0.01)
    parser.add_argument("--trials", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--oracle-max-n", type=int, default=64)
    parser.add_argument("--out", help="CSV path (default: stdout)")
    parser.set_defaults(handler=run)
    return parser


def _timed(fn: Callable[[], object]) -> int:
    start = time.perf_counter_ns()
    fn()
    return time.perf_counter_ns() - start


def _trial(model, scheme, state: DiscreteState, seed: int, dt: float, with_oracle: bool) -> Dict[str, int]:
    """一次试验：先做一轮预热（丢弃），再计时每个操作。"""
    workspace = StepWorkspace.allocate(model.n, scheme.s)
    rng = np.random.default_rng(seed)
    qbar = warm_start(scheme, state.q) + 1e-3 * rng.standard_normal((scheme.num_nodes, model.n))
    qbar[0] = state.q
    out = evaluate_del(model, scheme, qbar, state.p, dt=dt)

    ops: Dict[str, Callable[[], object]] = {
        "evaluate_del": lambda: evaluate_del(model, scheme, qbar, state.p, dt=dt),
        "newton_direction": lambda: newton_direction(model, scheme, out.cache, out, None, workspace),
        "linearize": lambda: d2_discrete_lagrangian(model, scheme, qbar, dt),
    }
    if with_oracle:
        ops["oracle_del"] = lambda: fd_del(model, scheme, qbar, state.p, dt=dt)
        ops["oracle_newton_direction"] = lambda: dense_newton_direction(
            fd_jacobian(model, scheme, qbar, state.p, dt=dt), out.residuals)
    for fn in ops.values():
        fn()
    return {name: _timed(fn) for name, fn in ops.items()}


def run(args) -> Tuple[int, str]:
    sizes = parse_int_list(args.n)
    scheme = build_scheme(args.scheme)
    check_time_grid(args.dt)
    trials = max(1, int(args.trials))
    rng = np.random.default_rng(args.seed)
    workers = thread_count()
    rows: List[List[str]] = []
    logger.info(f"[SCALING] sizes={sizes} scheme={scheme.name} trials={trials} workers={workers}")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for n in sizes:
            model = chain_model(n)
            states = [sample_initial_state(model, rng) for _ in range(trials)]
            seeds = [int(x) for x in rng.integers(0, 2 ** 32, size=trials)]
            with_oracle = n <= args.oracle_max_n
            futures = [pool.submit(_trial, model, scheme, st, seed, args.dt, with_oracle)
                       for st, seed in zip(states, seeds)]
            results = [f.result() for f in futures]
            ops = FAST_OPS + (ORACLE_OPS if with_oracle else ())
            for op in ops:
                median = int(np.median([r[op] for r in results]))
                rows.append([str(n), op, str(median)])
                logger.info(f"[SCALING] n={n} op={op} median_ns={median}")

    write_csv(args.out, HEADER, rows)
    return EXIT_OK, make_command_result(
        "scaling", True, data={"sizes": sizes, "scheme": scheme.name, "trials": trials, "out": args.out},
        message=f"timed {len(rows)} (n, op) pair(s)",
    )


__all__ = ["HEADER", "FAST_OPS", "ORACLE_OPS", "add_parser", "run"]
