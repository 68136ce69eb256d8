"""
离散 Euler–Lagrange (DEL) 方程的 O(sn) 递推求值。

一个时间步由控制点 q̄ᵏ = (q^{k,0}, …, q^{k,s}) 与动量 pᵏ 决定：

    r^{k,0} = pᵏ + S̄ᵀΩ̄⁰ + Σ_β a^{0β} S̄^{βᵀ} μ̄^β + Q⁰
    r^{k,α} =      S̄ᵀΩ̄ᵅ + Σ_β a^{αβ} S̄^{βᵀ} μ̄^β + Qᵅ      (α = 1..s−1)
    p^{k+1} =      S̄ᵀΩ̄ˢ + Σ_β a^{sβ} S̄^{βᵀ} μ̄^β + Qˢ

其中 μ̄、Γ̄ 为铰接体动量/冲量（自叶向根累加），Ω̄ᵅ = wᵅΔt ad_{v̄}ᵀ μ̄ + Γ̄。
重力作为空间 wrench 计入 Γ̄。残差符号与上式左端一致，Newton 直接求 r = 0。
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch
from .forces import ForceModel
from .galerkin import GalerkinScheme
from .model import (
    ROOT,
    KinematicsCache,
    MechanismModel,
    forward_pass,
    gravity_wrench,
    gravity_wrench_jacobian,
    kinematics,
)
from .se3 import SpatialTransform, coad_apply

logger = logging.getLogger(__name__)

Controls = Union[None, NDArray, Callable[[float], NDArray]]


@dataclass(frozen=True, eq=False)
class DiscreteState:
    """(q^{k,0}, pᵏ) 以及时间步编号 k。"""

    q: NDArray
    p: NDArray
    k: int = 0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise DimensionMismatch("momentum", q.shape, p.shape)
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))


@dataclass
class DelOutput:
    """
    DEL 求值结果。

    residuals: (s, n)，第 α 行为 r^{k,α}；next_momentum: (n,)
    mu / gamma / omega: (n, s+1, 6) 铰接体动量、冲量与 Ω̄
    wrench: (n, s+1, 6) 离散空间冲量 wᵅΔt F̄（含重力）；joint_force: (n, s+1) 离散 Q
    """

    residuals: NDArray
    next_momentum: NDArray
    mu: NDArray
    gamma: NDArray
    omega: NDArray
    wrench: NDArray
    joint_force: NDArray
    cache: KinematicsCache
    qbar: NDArray
    dt: float
    times: NDArray
    controls: List[Optional[NDArray]]
    visits: NDArray

    @property
    def residual_norm(self) -> float:
        """‖r‖∞。"""
        return float(np.abs(self.residuals).max()) if self.residuals.size else 0.0


@dataclass
class ConstrainedResidual:
    """约束 DEL 的残差：dynamics (s, n) 与 constraint (s, m)。"""

    dynamics: NDArray
    constraint: NDArray
    output: DelOutput

    @property
    def norm(self) -> float:
        parts = [np.abs(self.dynamics).max()]
        if self.constraint.size:
            parts.append(np.abs(self.constraint).max())
        return float(max(parts))


def sample_controls(controls: Controls, times: NDArray) -> List[Optional[NDArray]]:
    """在节点时刻采样控制输入：None、常数数组或 u(t) 可调用对象。"""
    if controls is None:
        return [None] * len(times)
    if callable(controls):
        return [np.asarray(controls(float(t)), dtype=float) for t in times]
    u = np.asarray(controls, dtype=float)
    return [u] * len(times)


def check_control_points(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray) -> NDArray:
    qbar = np.asarray(qbar, dtype=float)
    expected = (scheme.num_nodes, model.n)
    if qbar.shape != expected:
        raise DimensionMismatch("control points", expected, qbar.shape)
    return qbar


def _check_vector(what: str, x: NDArray, n: int) -> NDArray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (n,):
        raise DimensionMismatch(what, (n,), x.shape)
    return x


def discrete_forces(model: MechanismModel, scheme: GalerkinScheme, cache: KinematicsCache,
                    force_model: Optional[ForceModel], u_nodes, times: NDArray, dt: float,
                    include_gravity: bool = True):
    """各节点离散冲量 wᵅΔt F̄ (n,N,6) 与离散关节力 wᵅΔt Q (n,N)。"""
    n, N = cache.n, cache.num_nodes
    F = gravity_wrench(model, cache) if include_gravity else np.zeros((n, N, 6))
    Q = np.zeros((n, N))
    if force_model is not None:
        if force_model.has_body_wrench:
            F = F.copy()
            for i in range(n):
                for a in range(N):
                    g = SpatialTransform(cache.R[i, a], cache.p[i, a])
                    F[i, a] += force_model.body_wrench(i, g, cache.vbar[i, a], u_nodes[a], times[a])
        if force_model.has_joint_force:
            for i in range(n):
                for a in range(N):
                    Q[i, a] = force_model.joint_force(i, cache.q[i, a], cache.qdot[i, a], u_nodes[a], times[a])
    w_dt = scheme.weights * dt
    return F * w_dt[None, :, None], Q * w_dt[None, :]


def discrete_force_jacobians(model: MechanismModel, scheme: GalerkinScheme, cache: KinematicsCache,
                             force_model: Optional[ForceModel], u_nodes, times: NDArray, dt: float,
                             include_gravity: bool = True):
    """
    离散力的逐刚体 Jacobian：D₁F̄, D₂F̄ (n,N,6,6)，D₁Q, D₂Q (n,N)，均已乘 wᵅΔt。

    D₁F̄ 对空间左扰动求导；重力部分为解析式，力模型部分由模型自身提供（或中心差分）。
    """
    n, N = cache.n, cache.num_nodes
    D1F = gravity_wrench_jacobian(model, cache) if include_gravity else np.zeros((n, N, 6, 6))
    D2F = np.zeros((n, N, 6, 6))
    D1Q = np.zeros((n, N))
    D2Q = np.zeros((n, N))
    if force_model is not None:
        for i in range(n):
            for a in range(N):
                if force_model.has_body_wrench:
                    g = SpatialTransform(cache.R[i, a], cache.p[i, a])
                    d1, d2 = force_model.body_wrench_jacobians(i, g, cache.vbar[i, a], u_nodes[a], times[a])
                    D1F[i, a] += d1
                    D2F[i, a] += d2
                if force_model.has_joint_force:
                    D1Q[i, a], D2Q[i, a] = force_model.joint_force_jacobians(
                        i, cache.q[i, a], cache.qdot[i, a], u_nodes[a], times[a])
    w_dt = scheme.weights * dt
    return (D1F * w_dt[None, :, None, None], D2F * w_dt[None, :, None, None],
            D1Q * w_dt[None, :], D2Q * w_dt[None, :])


def evaluate_del(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, p: NDArray,
                 force_model: Optional[ForceModel] = None, controls: Controls = None,
                 *, dt: float, t0: float = 0.0) -> DelOutput:
    """
    求 DEL 残差 r^{k,0..s−1} 与 p^{k+1}：一次前向遍历 + 一次反向遍历。

    Args:
        qbar: (s+1, n) 控制点，第 0 行为 q^{k,0}
        p: pᵏ
        force_model: 可选外力模型
        controls: None / 常数 u / u(t)，在 t^{k,α} = t0 + cᵅΔt 采样
        dt: 步长 Δt
        t0: 本步起始时刻 kΔt

    Raises:
        DimensionMismatch: qbar 或 p 的形状与模型不符
    """
    qbar = check_control_points(model, scheme, qbar)
    p = _check_vector("momentum", p, model.n)
    cache = forward_pass(model, scheme, qbar, dt)
    times = scheme.node_times(t0, dt)
    u_nodes = sample_controls(controls, times)
    F, Q = discrete_forces(model, scheme, cache, force_model, u_nodes, times, dt)

    n, s = model.n, scheme.s
    mu = np.einsum("nakl,nal->nak", cache.Mbar, cache.vbar)
    gamma = F.copy()
    visits = cache.visits.copy()
    parents = model.parents
    for i in range(n - 1, -1, -1):
        par = parents[i]
        if par != ROOT:
            mu[par] += mu[i]
            gamma[par] += gamma[i]
        visits[i] += 1

    w_dt = scheme.weights * dt
    omega = w_dt[None, :, None] * coad_apply(cache.vbar, mu) + gamma
    s_omega = np.sum(cache.Sbar * omega, axis=-1)
    s_mu = np.sum(cache.Sbar * mu, axis=-1)
    total = s_omega + s_mu @ scheme.a_matrix.T + Q
    residuals = total[:, :s].T.copy()
    residuals[0] += p
    next_momentum = total[:, s].copy()
    logger.debug(f"[DEL] n={n} s={s} |r|={np.abs(residuals).max():.3e}")
    return DelOutput(
        residuals=residuals, next_momentum=next_momentum, mu=mu, gamma=gamma, omega=omega,
        wrench=F, joint_force=Q, cache=cache, qbar=qbar, dt=dt, times=times,
        controls=u_nodes, visits=visits,
    )


def discrete_momentum(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                      force_model: Optional[ForceModel] = None, controls: Controls = None,
                      *, dt: float, t0: float = 0.0) -> NDArray:
    """p^{k+1} = 𝔻_{s+1}𝓛_d(q̄ᵏ) + 𝓕_d^{k,s}。"""
    return evaluate_del(model, scheme, qbar, np.zeros(model.n), force_model, controls,
                        dt=dt, t0=t0).next_momentum


def constrained_residual(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, p: NDArray,
                         force_model: Optional[ForceModel], constraints, lam: NDArray,
                         controls: Controls = None, *, dt: float, t0: float = 0.0) -> ConstrainedResidual:
    """
    约束 DEL 残差：动力学行加上 A(q^{k,α}) λ^{k,α}（α = 0..s−1），
    约束行为 h(q^{k,α}, q̇^{k,α})（α = 1..s，取本区间节点）。

    Raises:
        DimensionMismatch: λ 形状不是 (s, m)
    """
    out = evaluate_del(model, scheme, qbar, p, force_model, controls, dt=dt, t0=t0)
    s, m = scheme.s, constraints.dim
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1 and s == 1:
        lam = lam[None, :]
    if lam.shape != (s, m):
        raise DimensionMismatch("multipliers", (s, m), lam.shape)
    qdot = scheme.velocities(out.qbar, dt)
    dynamics = out.residuals.copy()
    for a in range(s):
        if m:
            dynamics[a] += constraints.force_matrix(model, out.qbar[a]) @ lam[a]
    constraint = np.zeros((s, m))
    for a in range(1, s + 1):
        if m:
            constraint[a - 1] = constraints.value(model, out.qbar[a], qdot[a])
    return ConstrainedResidual(dynamics=dynamics, constraint=constraint, output=out)


def momentum_from_velocity(model: MechanismModel, q: NDArray, qdot: NDArray) -> NDArray:
    """连续 Legendre 变换 p = ∂K/∂q̇ = S̄ᵀμ̄ = M(q) q̇，O(n)。"""
    q = _check_vector("configuration", q, model.n)
    qdot = _check_vector("velocity", qdot, model.n)
    cache = kinematics(model, q[None, :], qdot[None, :])
    mu = np.einsum("nkl,nl->nk", cache.Mbar[:, 0], cache.vbar[:, 0])
    for i in range(model.n - 1, -1, -1):
        par = model.parents[i]
        if par != ROOT:
            mu[par] += mu[i]
    return np.sum(cache.Sbar[:, 0] * mu, axis=-1)


def initial_state(model: MechanismModel, q: NDArray, qdot: NDArray) -> DiscreteState:
    """由连续初值 (q⁰, q̇⁰) 构造 k = 0 的离散状态。"""
    return DiscreteState(q=np.asarray(q, dtype=float), p=momentum_from_velocity(model, q, qdot), k=0)


__all__ = [
    "Controls",
    "DiscreteState",
    "DelOutput",
    "ConstrainedResidual",
    "sample_controls",
    "check_control_points",
    "discrete_forces",
    "discrete_force_jacobians",
    "evaluate_del",
    "discrete_momentum",
    "constrained_residual",
    "momentum_from_velocity",
    "initial_state",
]
