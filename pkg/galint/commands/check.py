"""
check 命令：在小规模随机问题上比较递推实现与稠密差分参考实现。

每个用例随机生成一棵树（或使用 --model 指定的模型）、一个格式 s ∈ {1,2,3}
以及一组控制点，依次检查 DEL 残差、Newton 方向、能量 Hessian 与 𝔻²𝓛_d。
"""

import argparse
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..del_equations import evaluate_del, initial_state
from ..errors import GalintError
from ..forces import JointDamping
from ..galerkin import lobatto, simpson, trapezoidal
from ..linearize import d2_discrete_lagrangian, energy_hessians, linearize_del
from ..model import MechanismModel, random_tree
from ..newton import newton_direction
from ..oracle import (
    dense_newton_direction,
    fd_del,
    fd_discrete_lagrangian_hessian,
    fd_energy_hessians,
    fd_jacobian,
)
from .common import EXIT_FAILURE, EXIT_OK, build_model, make_command_result

logger = logging.getLogger(__name__)

TOLERANCES: Dict[str, float] = {
    "del": 1e-6,
    "newton_direction": 1e-6,
    "energy_hessians": 1e-5,
    "d2_discrete_lagrangian": 1e-4,
    "linearize_del": 1e-5,
}
MAX_RANDOM_N = 6
CHECK_DT = 0.02


@dataclass
class CheckResult:
    case: int
    name: str
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tol)


def relative_error(a, b) -> float:
    """‖a − b‖∞ / max(1, ‖b‖∞)。"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(1.0, float(np.abs(b).max())))


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("check", help="run the recursive-vs-dense equivalence suite")
    parser.add_argument("--model", help="JSON mechanism description (default: random trees)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--cases", type=int, default=12)
    parser.set_defaults(handler=run)
    return parser


def _case(case: int, model: MechanismModel, rng: np.random.Generator) -> List[CheckResult]:
    scheme = (trapezoidal(), simpson(), lobatto(3))[case % 3]
    n, dt = model.n, CHECK_DT
    q0 = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    qdot0 = rng.uniform(-1.0, 1.0, size=n)
    state = initial_state(model, q0, qdot0)
    qbar = q0[None, :] + np.outer(scheme.nodes * dt, qdot0) + 1e-3 * rng.standard_normal((scheme.num_nodes, n))
    qbar[0] = q0
    p = state.p
    results: List[CheckResult] = []

    def record(name, a, b):
        results.append(CheckResult(case, name, relative_error(a, b), TOLERANCES[name]))

    out = evaluate_del(model, scheme, qbar, p, dt=dt)
    r_fd, p_fd = fd_del(model, scheme, qbar, p, dt=dt)
    record("del", np.concatenate([out.residuals.ravel(), out.next_momentum]),
           np.concatenate([r_fd.ravel(), p_fd]))

    dq = newton_direction(model, scheme, out.cache, out)
    J = fd_jacobian(model, scheme, qbar, p, dt=dt)
    record("newton_direction", dq, dense_newton_direction(J, out.residuals))

    eh = energy_hessians(model, q0, qdot0)
    ref = fd_energy_hessians(model, q0, qdot0)
    record("energy_hessians",
           np.concatenate([eh.d2K_dqdot2, eh.d2K_dq_dqdot, eh.d2K_dq2, eh.d2V_dq2]),
           np.concatenate([ref.d2K_dqdot2, ref.d2K_dq_dqdot, ref.d2K_dq2, ref.d2V_dq2]))

    record("d2_discrete_lagrangian", d2_discrete_lagrangian(model, scheme, qbar, dt).as_matrix(),
           fd_discrete_lagrangian_hessian(model, scheme, qbar, dt))

    damping = JointDamping(0.3)
    lin = linearize_del(model, scheme, qbar, p, damping, dt=dt)
    record("linearize_del", lin.implicit_jacobian, fd_jacobian(model, scheme, qbar, p, damping, dt=dt))
    return results


def run_checks(model: Optional[MechanismModel], seed: int, cases: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results: List[CheckResult] = []
    for case in range(cases):
        case_model = model
        if case_model is None:
            case_model = random_tree(rng, int(rng.integers(1, MAX_RANDOM_N + 1)))
        for res in _case(case, case_model, rng):
            status = "ok" if res.passed else "FAIL"
            logger.info(f"[CHECK] case={case} n={case_model.n} {res.name}: "
                        f"rel_error={res.error:.3e} tol={res.tol:.0e} {status}")
            results.append(res)
    return results


def run(args) -> Tuple[int, str]:
    model = build_model(args.model, None) if args.model else None
    try:
        results = run_checks(model, args.seed, max(1, int(args.cases)))
    except GalintError as e:
        logger.error(f"[CHECK] Suite aborted: {e}")
        return EXIT_FAILURE, make_command_result("check", False, error=str(e))
    failed = [r for r in results if not r.passed]
    worst: Dict[str, float] = {}
    for r in results:
        worst[r.name] = max(worst.get(r.name, 0.0), r.error)
    data = {"checks": len(results), "failed": len(failed), "worst_rel_error": worst}
    if failed:
        names = sorted({r.name for r in failed})
        return EXIT_FAILURE, make_command_result("check", False, data=data,
                                                 error=f"{len(failed)} check(s) failed: {', '.join(names)}")
    return EXIT_OK, make_command_result("check", True, data=data, message=f"all {len(results)} checks passed")


__all__ = ["TOLERANCES", "CheckResult", "relative_error", "run_checks", "add_parser", "run"]
