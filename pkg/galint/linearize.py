"""
DEL 线性化：动能/重力势能的 O(n²) 解析二阶导数，以及经链式法则组装的 𝔻²𝓛_d。

这里 𝓛 = K − V_g（重力作为势能），力模型不含重力；
与 del_equations 中“重力作为 wrench”的写法在数值上等价，注意不要重复计入。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from .del_equations import (
    Controls,
    check_control_points,
    discrete_force_jacobians,
    discrete_forces,
    sample_controls,
)
from .forces import ForceModel
from .galerkin import GalerkinScheme
from .model import ROOT, KinematicsCache, MechanismModel, forward_pass, kinematics, potential_energy
from .se3 import ad_apply, ad_dual, hat

logger = logging.getLogger(__name__)


@dataclass
class EnergyHessians:
    """
    K(q, q̇) 与 V_g(q) 的一、二阶导数（n×n / n）。

    d2K_dq_dqdot[j, i] = ∂²K/∂q_j∂q̇_i，d2K_dqdot_dq 为其转置。
    """

    d2K_dqdot2: NDArray
    d2K_dqdot_dq: NDArray
    d2K_dq_dqdot: NDArray
    d2K_dq2: NDArray
    d2V_dq2: NDArray
    dK_dq: NDArray
    dK_dqdot: NDArray
    dV_dq: NDArray
    block_writes: int = 0
    accumulator_updates: int = 0

    @property
    def d2L_dq2(self) -> NDArray:
        return self.d2K_dq2 - self.d2V_dq2


def _single_node(model: MechanismModel, q: NDArray, qdot: NDArray) -> KinematicsCache:
    q = np.asarray(q, dtype=float).reshape(1, model.n)
    qdot = np.asarray(qdot, dtype=float).reshape(1, model.n)
    return kinematics(model, q, qdot)


def _subtree_sums(model: MechanismModel, cache: KinematicsCache):
    """反向累加 μ̄_i、σ_m、σ_p 以及复合惯量 𝓜̄_i（单节点）。"""
    n = model.n
    mu = np.einsum("nkl,nl->nk", cache.Mbar[:, 0], cache.vbar[:, 0])
    composite = cache.Mbar[:, 0].copy()
    sigma_m = model.masses.copy()
    sigma_p = model.masses[:, None] * cache.p[:, 0]
    updates = 0
    for i in range(n - 1, -1, -1):
        par = model.parents[i]
        if par != ROOT:
            mu[par] += mu[i]
            composite[par] += composite[i]
            sigma_m[par] += sigma_m[i]
            sigma_p[par] += sigma_p[i]
            updates += 1
    return mu, composite, sigma_m, sigma_p, updates


def energy_gradients(model: MechanismModel, q: NDArray, qdot: NDArray) -> Tuple[NDArray, NDArray, NDArray]:
    """O(n) 一阶导数 (∂K/∂q, ∂K/∂q̇, ∂V/∂q)：Ṡ̄ᵀμ̄、S̄ᵀμ̄、−g⃗ᵀ(σ_m n̄ + s̄ × σ_p)。"""
    cache = _single_node(model, q, qdot)
    mu, _, sigma_m, sigma_p, _ = _subtree_sums(model, cache)
    return _gradients(model, cache, mu, sigma_m, sigma_p)


def _gradients(model, cache, mu, sigma_m, sigma_p):
    S, Sd = cache.Sbar[:, 0], cache.Sdot[:, 0]
    dK_dqdot = np.sum(S * mu, axis=-1)
    dK_dq = np.sum(Sd * mu, axis=-1)
    moment = sigma_m[:, None] * S[:, 3:] + np.cross(S[:, :3], sigma_p)
    dV_dq = -moment @ model.gravity
    return dK_dq, dK_dqdot, dV_dq


def energy_hessians(model: MechanismModel, q: NDArray, qdot: NDArray) -> EnergyHessians:
    """
    动能与重力势能的全部二阶导数，O(n²)。

    反向累加 𝓜̄_i、𝓜̄ᴬ_i = 𝓜̄_i S̄_i、𝓜̄ᴮ_i = 𝓜̄_i Ṡ̄_i − ad^D_{μ̄_i} S̄_i，
    σ̄ᴬ_i = ĝ(σ_m n̄_i − σ̂_p s̄_i)；对 j ∈ anc(i) ∪ {i} 填充对称块。
    """
    n = model.n
    cache = _single_node(model, q, qdot)
    mu, composite, sigma_m, sigma_p, updates = _subtree_sums(model, cache)
    dK_dq, dK_dqdot, dV_dq = _gradients(model, cache, mu, sigma_m, sigma_p)

    S, Sd = cache.Sbar[:, 0], cache.Sdot[:, 0]
    MA = np.einsum("nkl,nl->nk", composite, S)
    MB = np.einsum("nkl,nl->nk", composite, Sd) - np.einsum("nkl,nl->nk", ad_dual(mu), S)
    g_hat = hat(model.gravity)
    sigma_a = np.einsum("kl,nl->nk", g_hat,
                        sigma_m[:, None] * S[:, 3:] - np.cross(sigma_p, S[:, :3]))

    Kdd = np.zeros((n, n))
    C = np.zeros((n, n))
    Kqq = np.zeros((n, n))
    Vqq = np.zeros((n, n))
    writes = 0
    for i in range(n):
        for j in model.supports(i):
            Kdd[i, j] = Kdd[j, i] = S[j] @ MA[i]
            C[j, i] = Sd[j] @ MA[i]
            C[i, j] = S[j] @ MB[i]
            Kqq[i, j] = Kqq[j, i] = Sd[j] @ MB[i]
            Vqq[i, j] = Vqq[j, i] = S[j, :3] @ sigma_a[i]
            writes += 1
    logger.debug(f"[LINEARIZE] energy_hessians n={n} block_writes={writes} updates={updates}")
    return EnergyHessians(
        d2K_dqdot2=Kdd, d2K_dqdot_dq=C.T.copy(), d2K_dq_dqdot=C, d2K_dq2=Kqq, d2V_dq2=Vqq,
        dK_dq=dK_dq, dK_dqdot=dK_dqdot, dV_dq=dV_dq,
        block_writes=writes, accumulator_updates=updates,
    )


def mass_matrix(model: MechanismModel, q: NDArray) -> NDArray:
    """M(q) = ∂²K/∂q̇²（与 q̇ 无关）。"""
    return energy_hessians(model, q, np.zeros(model.n)).d2K_dqdot2


def mechanical_energy(model: MechanismModel, q: NDArray, p: NDArray) -> float:
    """由 (q, p) 求 K + V：q̇ = M(q)⁻¹p，K = ½ q̇ᵀp。"""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    qdot = np.linalg.solve(mass_matrix(model, q), p)
    cache = _single_node(model, q, qdot)
    return 0.5 * float(qdot @ p) + potential_energy(model, cache, 0)


@dataclass
class DiscreteLagrangianHessian:
    """blocks[α, β] = 𝔻_{α+1}𝔻_{β+1}𝓛_d，形状 (s+1, s+1, n, n)。"""

    blocks: NDArray

    def as_matrix(self) -> NDArray:
        """((s+1)n, (s+1)n)，行/列索引 α·n + i。"""
        N, _, n, _ = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(N * n, N * n)


def d2_discrete_lagrangian(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray,
                           dt: float) -> DiscreteLagrangianHessian:
    """经 q̇^γ = Σ_β b^{γβ} q^β / Δt 的链式法则组装 𝔻²𝓛_d，O(s²n²)。"""
    qbar = check_control_points(model, scheme, qbar)
    n, N = model.n, scheme.num_nodes
    b = scheme.diff_matrix
    w_dt = scheme.weights * dt
    qdot = scheme.velocities(qbar, dt)
    blocks = np.zeros((N, N, n, n))
    for g in range(N):
        eh = energy_hessians(model, qbar[g], qdot[g])
        coef = b[g] / dt
        blocks[g, g] += w_dt[g] * eh.d2L_dq2
        blocks[g, :] += w_dt[g] * coef[:, None, None] * eh.d2K_dq_dqdot[None]
        blocks[:, g] += w_dt[g] * coef[:, None, None] * eh.d2K_dqdot_dq[None]
        blocks += w_dt[g] * np.einsum("a,b->ab", coef, coef)[:, :, None, None] * eh.d2K_dqdot2[None, None]
    return DiscreteLagrangianHessian(blocks=blocks)


def generalized_force_jacobians(model: MechanismModel, cache: KinematicsCache, alpha: int,
                                F: NDArray, D1F: NDArray, D2F: NDArray,
                                D1Q: NDArray, D2Q: NDArray) -> Tuple[NDArray, NDArray]:
    """
    节点 α 上广义力 f_j = S̄_jᵀΓ̄_j + Q_j 对 (q, q̇) 的 Jacobian，逐列 O(n)，共 O(n²)。

    ∂/∂q_i：子树 sub(i) 中 δF̄_k = D₁F̄_k S̄_i + D₂F̄_k ad_{S̄_i}(v̄_k − v̄_i)，
    另有 j ∈ sub(i) 的 S̄_jᵀ ad^D_{Γ̄_j} S̄_i 项；∂/∂q̇_i：δF̄_k = D₂F̄_k S̄_i。
    """
    n = model.n
    S, v = cache.Sbar[:, alpha], cache.vbar[:, alpha]
    gamma = F[:, alpha].copy()
    for k in range(n - 1, -1, -1):
        par = model.parents[k]
        if par != ROOT:
            gamma[par] += gamma[k]
    coad_S = np.einsum("jkl,il->jik", ad_dual(gamma), S)
    in_sub = np.array([[model.is_ancestor_or_self(i, k) for k in range(n)] for i in range(n)])

    dfq = np.zeros((n, n))
    dfqd = np.zeros((n, n))
    for i in range(n):
        mask = in_sub[i][:, None]
        dF_q = mask * (np.einsum("kab,b->ka", D1F[:, alpha], S[i])
                       + np.einsum("kab,kb->ka", D2F[:, alpha], ad_apply(S[i], v - v[i])))
        dF_qd = mask * np.einsum("kab,b->ka", D2F[:, alpha], S[i])
        for k in range(n - 1, -1, -1):
            par = model.parents[k]
            if par != ROOT:
                dF_q[par] += dF_q[k]
                dF_qd[par] += dF_qd[k]
        dfq[:, i] = np.sum(S * dF_q, axis=-1)
        below = in_sub[i].copy()
        below[i] = False
        dfq[below, i] += np.einsum("jk,jk->j", S[below], coad_S[below, i])
        dfqd[:, i] = np.sum(S * dF_qd, axis=-1)
    dfq[np.arange(n), np.arange(n)] += D1Q[:, alpha]
    dfqd[np.arange(n), np.arange(n)] += D2Q[:, alpha]
    return dfq, dfqd


@dataclass
class DelLinearization:
    """
    DEL 方程对 (q̄ᵏ, pᵏ) 的 Jacobian，行/列索引 α·n + i。

    dr_dqbar: (s n, (s+1) n)；dr_dp: (s n, n)；dpnext_dqbar: (n, (s+1) n)
    """

    dr_dqbar: NDArray
    dr_dp: NDArray
    dpnext_dqbar: NDArray
    hessian: DiscreteLagrangianHessian

    @property
    def implicit_jacobian(self) -> NDArray:
        """Newton 使用的 J：对 q^{k,1..s} 的子块。"""
        n = self.dr_dp.shape[1]
        return self.dr_dqbar[:, n:]


def linearize_del(model: MechanismModel, scheme: GalerkinScheme, qbar: NDArray, p: NDArray,
                  force_model: Optional[ForceModel] = None, controls: Controls = None, *,
                  dt: float, t0: float = 0.0) -> DelLinearization:
    """
    组装 ∂r/∂q̄、∂r/∂p 与 ∂p^{k+1}/∂q̄。

    力项：∂f^α/∂q^β = δ^{αβ} ∂f/∂q + (b^{αβ}/Δt) ∂f/∂q̇，节点 α 处求值。
    """
    qbar = check_control_points(model, scheme, qbar)
    n, s, N = model.n, scheme.s, scheme.num_nodes
    b = scheme.diff_matrix
    hessian = d2_discrete_lagrangian(model, scheme, qbar, dt)
    full = hessian.blocks.copy()

    if force_model is not None:
        cache = forward_pass(model, scheme, qbar, dt)
        times = scheme.node_times(t0, dt)
        u_nodes = sample_controls(controls, times)
        F, _ = discrete_forces(model, scheme, cache, force_model, u_nodes, times, dt, include_gravity=False)
        D1F, D2F, D1Q, D2Q = discrete_force_jacobians(
            model, scheme, cache, force_model, u_nodes, times, dt, include_gravity=False)
        for a in range(N):
            dfq, dfqd = generalized_force_jacobians(model, cache, a, F, D1F, D2F, D1Q, D2Q)
            full[a, a] += dfq
            full[a] += (b[a] / dt)[:, None, None] * dfqd[None]

    matrix = full.transpose(0, 2, 1, 3).reshape(N * n, N * n)
    dr_dp = np.zeros((s * n, n))
    dr_dp[:n] = np.eye(n)
    logger.debug(f"[LINEARIZE] linearize_del n={n} s={s}")
    return DelLinearization(
        dr_dqbar=matrix[: s * n].copy(), dr_dp=dr_dp,
        dpnext_dqbar=matrix[s * n:].copy(), hessian=hessian,
    )


__all__ = [
    "EnergyHessians",
    "DiscreteLagrangianHessian",
    "DelLinearization",
    "energy_gradients",
    "energy_hessians",
    "mass_matrix",
    "mechanical_energy",
    "d2_discrete_lagrangian",
    "generalized_force_jacobians",
    "linearize_del",
]
