"""
稠密参考实现：直接求和的离散 Lagrangian、中心差分导数、稠密 LU 求解。

只用于测试与 check 命令，复杂度 O(s²n³) 甚至更高，不参与性能比较。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lu_factor, lu_solve

from .constraints import Constraint
from .del_equations import (
    Controls,
    DiscreteState,
    check_control_points,
    discrete_forces,
    evaluate_del,
    sample_controls,
)
from .errors import NoConvergence, RankDeficientConstraints, SingularJacobian, UnsupportedOrder
from .forces import ForceModel
from .galerkin import GalerkinScheme
from .linearize import EnergyHessians, energy_gradients
from .model import MechanismModel, forward_pass, kinematics, kinetic_energy, lagrangian, potential_energy
from .newton import CONDITION_LIMIT, SolverConfig, warm_start

logger = logging.getLogger(__name__)

FD_MODES = ("central",)


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-6
    hessian_step: float = 1e-5
    mode: str = "central"

    def __post_init__(self):
        if not (self.step > 0.0 and self.hessian_step > 0.0):
            raise ValueError(f"finite-difference steps must be positive, got {self.step}, {self.hessian_step}")
        if self.mode not in FD_MODES:
            raise ValueError(f"unsupported finite-difference mode {self.mode!r}")


DEFAULT_FD = FdConfig()


def discrete_lagrangian(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, dt: float) -> float:
    """𝓛_d = Σ_α wᵅ 𝓛(q^α, q̇^α) Δt，逐节点直接求和。"""
    qbar = check_control_points(model, scheme, qbar)
    cache = forward_pass(model, scheme, qbar, dt)
    return float(sum(w * lagrangian(model, cache, a) for a, w in enumerate(scheme.weights)) * dt)


def generalized_forces(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                       force_model: Optional[ForceModel] = None, controls: Controls = None, *,
                       dt: float, t0: float = 0.0) -> NDArray:
    """离散广义力 wᵅΔt(S̄_jᵀ Σ_{k∈sub(j)} F̄_k + Q_j)，形状 (s+1, n)，不含重力。"""
    qbar = check_control_points(model, scheme, qbar)
    n, N = model.n, scheme.num_nodes
    if force_model is None:
        return np.zeros((N, n))
    cache = forward_pass(model, scheme, qbar, dt)
    times = scheme.node_times(t0, dt)
    F, Q = discrete_forces(model, scheme, cache, force_model, sample_controls(controls, times),
                           times, dt, include_gravity=False)
    out = Q.T.copy()
    for j in range(n):
        for k in range(n):
            if model.is_ancestor_or_self(j, k):
                out[:, j] += np.sum(cache.Sbar[j] * F[k], axis=-1)
    return out


def _central_gradient(f, x: NDArray, h: float) -> NDArray:
    x = np.asarray(x, dtype=float)
    grad = np.zeros(x.size)
    flat = x.reshape(-1)
    for k in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[k] += h
        minus[k] -= h
        grad[k] = (f(plus.reshape(x.shape)) - f(minus.reshape(x.shape))) / (2.0 * h)
    return grad.reshape(x.shape)


def fd_discrete_lagrangian_gradient(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                                    dt: float, step: float = DEFAULT_FD.step) -> NDArray:
    """𝔻_{α+1}𝓛_d 的中心差分，形状 (s+1, n)。"""
    return _central_gradient(lambda x: discrete_lagrangian(model, scheme, x, dt), qbar, step)


def discrete_lagrangian_gradient(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                                 dt: float) -> NDArray:
    """由 energy_gradients 按链式法则求 𝔻𝓛_d，(s+1, n)。"""
    qbar = check_control_points(model, scheme, qbar)
    b = scheme.diff_matrix
    qdot = scheme.velocities(qbar, dt)
    out = np.zeros_like(qbar)
    for g, w in enumerate(scheme.weights):
        dK_dq, dK_dqdot, dV_dq = energy_gradients(model, qbar[g], qdot[g])
        out[g] += w * dt * (dK_dq - dV_dq)
        out += w * np.outer(b[g], dK_dqdot)
    return out


def fd_discrete_lagrangian_hessian(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                                   dt: float, step: float = DEFAULT_FD.hessian_step,
                                   double_difference: bool = False) -> NDArray:
    """
    𝔻²𝓛_d 的稠密 ((s+1)n)² 矩阵，行/列索引 α·n + i。

    默认对链式法则梯度做中心差分；double_difference=True 时直接对标量 𝓛_d 做二阶差分。
    """
    qbar = check_control_points(model, scheme, qbar)
    size = qbar.size
    flat = qbar.reshape(-1)
    hess = np.zeros((size, size))
    if double_difference:
        def f(x):
            return discrete_lagrangian(model, scheme, x.reshape(qbar.shape), dt)

        for a in range(size):
            for c in range(a, size):
                hess[a, c] = hess[c, a] = _second_difference(f, flat, a, c, step)
        return hess
    for c in range(size):
        plus = flat.copy()
        minus = flat.copy()
        plus[c] += step
        minus[c] -= step
        gp = discrete_lagrangian_gradient(model, scheme, plus.reshape(qbar.shape), dt).reshape(-1)
        gm = discrete_lagrangian_gradient(model, scheme, minus.reshape(qbar.shape), dt).reshape(-1)
        hess[:, c] = (gp - gm) / (2.0 * step)
    return hess


def _second_difference(f, x: NDArray, a: int, c: int, h: float) -> float:
    def at(da, dc):
        y = x.copy()
        y[a] += da
        y[c] += dc
        return f(y)

    if a == c:
        return (at(h, 0.0) - 2.0 * f(x) + at(-h, 0.0)) / (h * h)
    return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)


def fd_del(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, p: NDArray,
           force_model: Optional[ForceModel] = None, controls: Controls = None, *,
           dt: float, t0: float = 0.0, fd: FdConfig = DEFAULT_FD) -> Tuple[NDArray, NDArray]:
    """差分版 DEL：返回 (残差 (s, n), p^{k+1})。"""
    qbar = check_control_points(model, scheme, qbar)
    s = scheme.s
    total = fd_discrete_lagrangian_gradient(model, scheme, qbar, dt, fd.step)
    total = total + generalized_forces(model, scheme, qbar, force_model, controls, dt=dt, t0=t0)
    residuals = total[:s].copy()
    residuals[0] += np.asarray(p, dtype=float)
    return residuals, total[s].copy()


def fd_jacobian(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, p: NDArray,
                force_model: Optional[ForceModel] = None, controls: Controls = None, *,
                dt: float, t0: float = 0.0, step: float = DEFAULT_FD.step) -> NDArray:
    """evaluate_del 残差对 q^{k,1..s} 的中心差分 Jacobian，(s n) × (s n)，索引 (α−1)·n + i。"""
    qbar = check_control_points(model, scheme, qbar)
    s, n = scheme.s, model.n
    J = np.zeros((s * n, s * n))
    for a in range(1, s + 1):
        for i in range(n):
            plus = qbar.copy()
            minus = qbar.copy()
            plus[a, i] += step
            minus[a, i] -= step
            rp = evaluate_del(model, scheme, plus, p, force_model, controls, dt=dt, t0=t0).residuals
            rm = evaluate_del(model, scheme, minus, p, force_model, controls, dt=dt, t0=t0).residuals
            J[:, (a - 1) * n + i] = ((rp - rm) / (2.0 * step)).reshape(-1)
    return J


def _dense_solve(matrix: NDArray, rhs: NDArray) -> Tuple[NDArray, float]:
    condition = np.linalg.cond(matrix) if np.all(np.isfinite(matrix)) else np.inf
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        return None, float(condition)
    return lu_solve(lu_factor(matrix), rhs), float(condition)


def dense_newton_direction(jacobian: NDArray, residuals: NDArray) -> NDArray:
    """δq̄ = −J⁻¹r，稠密 LU；返回 (s, n)。"""
    residuals = np.asarray(residuals, dtype=float)
    sol, condition = _dense_solve(jacobian, residuals.reshape(-1))
    if sol is None:
        raise SingularJacobian(body=None, node=None, condition=condition)
    return -sol.reshape(residuals.shape)


def _kinetic(model, q, qdot) -> float:
    return kinetic_energy(kinematics(model, q[None, :], qdot[None, :]), 0)


def _potential(model, q) -> float:
    return potential_energy(model, kinematics(model, q[None, :], np.zeros((1, model.n))), 0)


def fd_energy_hessians(model: MechanismModel, q: NDArray, qdot: NDArray, step: float = DEFAULT_FD.hessian_step,
                       double_difference: bool = False) -> EnergyHessians:
    """
    EnergyHessians 的差分参考值。

    默认对解析一阶导数做中心差分；double_difference=True 时对 K、V 标量做二阶差分。
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    n = model.n
    dK_dq, dK_dqdot, dV_dq = energy_gradients(model, q, qdot)
    Kdd = np.zeros((n, n))
    C = np.zeros((n, n))
    Kqq = np.zeros((n, n))
    Vqq = np.zeros((n, n))
    if double_difference:
        x = np.concatenate([q, qdot])

        def K(y):
            return _kinetic(model, y[:n], y[n:])

        def V(y):
            return _potential(model, y[:n])

        for a in range(2 * n):
            for c in range(2 * n):
                kac = _second_difference(K, x, a, c, step)
                if a < n and c < n:
                    Kqq[a, c] = kac
                    Vqq[a, c] = _second_difference(V, x, a, c, step)
                elif a < n:
                    C[a, c - n] = kac
                elif c >= n:
                    Kdd[a - n, c - n] = kac
    else:
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            gq_p = energy_gradients(model, q + e, qdot)
            gq_m = energy_gradients(model, q - e, qdot)
            gd_p = energy_gradients(model, q, qdot + e)
            gd_m = energy_gradients(model, q, qdot - e)
            Kqq[:, i] = (gq_p[0] - gq_m[0]) / (2.0 * step)
            Vqq[:, i] = (gq_p[2] - gq_m[2]) / (2.0 * step)
            C[:, i] = (gd_p[0] - gd_m[0]) / (2.0 * step)
            Kdd[:, i] = (gd_p[1] - gd_m[1]) / (2.0 * step)
    return EnergyHessians(
        d2K_dqdot2=Kdd, d2K_dqdot_dq=C.T.copy(), d2K_dq_dqdot=C, d2K_dq2=Kqq, d2V_dq2=Vqq,
        dK_dq=dK_dq, dK_dqdot=dK_dqdot, dV_dq=dV_dq,
    )


def dense_step(model: MechanismModel, scheme: GalerkinScheme, state: DiscreteState,
               force_model: Optional[ForceModel] = None, controls: Controls = None, *,
               dt: float, config: Optional[SolverConfig] = None,
               previous_q: Optional[NDArray] = None) -> Tuple[DiscreteState, int]:
    """以差分 Jacobian 做纯 Newton 的参考时间步，返回 (下一状态, 迭代次数)。"""
    config = config or SolverConfig()
    t0 = state.k * dt
    qbar = warm_start(scheme, state.q, previous_q)
    norm = np.inf
    for iteration in range(1, config.max_iter + 1):
        out = evaluate_del(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)
        norm = out.residual_norm
        if norm < config.tol:
            return DiscreteState(q=qbar[scheme.s], p=out.next_momentum, k=state.k + 1), iteration
        J = fd_jacobian(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)
        qbar = qbar.copy()
        qbar[1:] += dense_newton_direction(J, out.residuals)
    logger.warning(f"[ORACLE] dense step did not converge (|r|={norm:.3e})")
    raise NoConvergence(config.max_iter, float(norm))


def dense_constrained_step(model: MechanismModel, scheme: GalerkinScheme, state: DiscreteState,
                           force_model: Optional[ForceModel], constraints: Constraint,
                           controls: Controls = None, *, dt: float,
                           config: Optional[SolverConfig] = None,
                           previous_q: Optional[NDArray] = None) -> Tuple[DiscreteState, NDArray, int]:
    """
    s = 1 约束步的 KKT 参考解：[[J, A], [𝔻h, 0]] 稠密 LU。

    𝔻h 对 h(q^{k+1}, q̇^{k+1}) 整体做中心差分（含 q̇ 对 q^{k+1} 的依赖）。
    """
    if scheme.s != 1:
        raise UnsupportedOrder(scheme.s, "constrained step supports s = 1 only")
    config = config or SolverConfig()
    n, m = model.n, constraints.dim
    t0 = state.k * dt
    b = scheme.diff_matrix
    A0 = constraints.force_matrix(model, state.q)
    qbar = warm_start(scheme, state.q, previous_q)
    lam = np.zeros(m)

    def h_of(q1):
        qb = np.vstack([qbar[0], q1])
        return constraints.value(model, q1, b[1] @ qb / dt)

    norm = np.inf
    for iteration in range(1, config.max_iter + 1):
        out = evaluate_del(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)
        r_q = out.residuals[0] + A0 @ lam
        r_c = h_of(qbar[1])
        norm = float(max(np.abs(r_q).max(), np.abs(r_c).max()))
        if norm < config.tol:
            nxt = DiscreteState(q=qbar[1], p=out.next_momentum, k=state.k + 1)
            return nxt, lam, iteration
        J = fd_jacobian(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)
        Dh = np.zeros((m, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = DEFAULT_FD.step
            Dh[:, i] = (h_of(qbar[1] + e) - h_of(qbar[1] - e)) / (2.0 * DEFAULT_FD.step)
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = J
        kkt[:n, n:] = A0
        kkt[n:, :n] = Dh
        sol, condition = _dense_solve(kkt, -np.concatenate([r_q, r_c]))
        if sol is None:
            raise RankDeficientConstraints(condition)
        qbar = qbar.copy()
        qbar[1] += sol[:n]
        lam = lam + sol[n:]
    logger.warning(f"[ORACLE] dense constrained step did not converge (|r|={norm:.3e})")
    raise NoConvergence(config.max_iter, float(norm))


__all__ = [
    "FdConfig",
    "discrete_lagrangian",
    "generalized_forces",
    "fd_discrete_lagrangian_gradient",
    "discrete_lagrangian_gradient",
    "fd_discrete_lagrangian_hessian",
    "fd_del",
    "fd_jacobian",
    "dense_newton_direction",
    "fd_energy_hessians",
    "dense_step",
    "dense_constrained_step",
]
