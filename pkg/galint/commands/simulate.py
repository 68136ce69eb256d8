"""
simulate 命令：从采样初值出发积分一条轨迹，逐步写出 (t, q, p, energy, iterations, residual)。
"""

import argparse
import logging
from typing import List, Tuple

import numpy as np

from ..errors import GalintError, NoConvergence
from ..linearize import mechanical_energy
from ..newton import SolverConfig, StepWorkspace, step
from .common import (
    EXIT_FAILURE,
    EXIT_OK,
    build_model,
    build_scheme,
    check_time_grid,
    format_float,
    make_command_result,
    sample_initial_state,
    write_csv,
)

logger = logging.getLogger(__name__)


def header(n: int) -> List[str]:
    return (["t"] + [f"q_{i + 1}" for i in range(n)] + [f"p_{i + 1}" for i in range(n)]
            + ["energy", "iterations", "residual"])


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("simulate", help="integrate one trajectory and write it as CSV")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--model", help="JSON mechanism description")
    source.add_argument("--chain", type=int, help="n-link pendulum chain")
    parser.add_argument("--link-mass", type=float, default=1.0)
    parser.add_argument("--link-length", type=float, default=1.0)
    parser.add_argument("--scheme", default="trapezoidal", help="trapezoidal | simpson | lobatto:s")
    parser.add_argument("--dt", type=float, required=True)
    parser.add_argument("--horizon", type=float, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--q-range", type=float, default=np.pi / 2)
    parser.add_argument("--qdot-range", type=float, default=np.pi / 2)
    parser.add_argument("--out", help="CSV path (default: stdout)")
    parser.add_argument("--allow-failures", action="store_true",
                        help="stop at the first failed step but exit 0")
    parser.set_defaults(handler=run)
    return parser


def run(args) -> Tuple[int, str]:
    model = build_model(args.model, args.chain, args.link_mass, args.link_length)
    scheme = build_scheme(args.scheme)
    steps = check_time_grid(args.dt, args.horizon)
    config = SolverConfig.from_settings()
    rng = np.random.default_rng(args.seed)
    state = sample_initial_state(model, rng, args.q_range, args.qdot_range)
    workspace = StepWorkspace.allocate(model.n, scheme.s)

    def row(st, iterations, residual):
        energy = mechanical_energy(model, st.q, st.p)
        values = [st.k * args.dt, *st.q, *st.p, energy]
        return [format_float(v) for v in values] + [str(iterations), format_float(residual)]

    rows = [row(state, 0, 0.0)]
    previous_q = None
    failure = None
    logger.info(f"[SIMULATE] n={model.n} scheme={scheme.name} dt={args.dt} steps={steps}")
    for _ in range(steps):
        try:
            nxt, diag = step(model, scheme, state, dt=args.dt, config=config,
                             previous_q=previous_q, workspace=workspace)
        except GalintError as e:
            failure = e
            logger.warning(f"[SIMULATE] Step {state.k} failed: {e}")
            break
        previous_q = state.q
        state = nxt
        rows.append(row(state, diag.iterations, diag.residual))

    write_csv(args.out, header(model.n), rows)
    data = {"n": model.n, "scheme": scheme.name, "dt": args.dt, "steps": len(rows) - 1,
            "requested_steps": steps, "out": args.out}
    if failure is None:
        return EXIT_OK, make_command_result("simulate", True, data=data,
                                            message=f"integrated {steps} step(s)")
    code = EXIT_OK if args.allow_failures else EXIT_FAILURE
    extra = {"iterations": failure.iterations} if isinstance(failure, NoConvergence) else None
    return code, make_command_result("simulate", False, data=data, error=str(failure), extra=extra)


__all__ = ["header", "add_parser", "run"]
