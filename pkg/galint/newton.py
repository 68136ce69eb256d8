"""
DEL 隐式方程的 Newton 求解。

newton_direction 用一次反向遍历（逐刚体消去 δq_i）加一次前向遍历在 O(s³n)
内求 δq̄ = −J⁻¹r，不组装 sn×sn 的稠密 Jacobian。反向遍历只依赖 q̄，
拆成 factorize（与右端项无关）和 solve_factored（每个右端项 O(s²n)），
约束步用后者复用同一组因子。

记号（第 i 个刚体，节点 α,ρ,ν ∈ 0..s，关节方向 γ ∈ 1..s；η̄⁰ ≡ 0，δq⁰ ≡ 0）：

    δ̄μ̄ᵅ = Σ_ρ Dᵅᵖ δ̄v̄ᵖ + Σ_ν Gᵅᵛ η̄ᵛ + lᵅ
    δ̄Γ̄ᵅ = Σ_ρ Πᵅᵖ δ̄v̄ᵖ + Σ_ν Ψᵅᵛ η̄ᵛ + ζᵅ
    δq^γ  = Σ_ρ X^{γρ} δ̄v̄_par^ρ + Σ_ν Y^{γν} η̄_par^ν + y^γ
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lu_factor, lu_solve

from .constraints import Constraint
from .del_equations import (
    Controls,
    DelOutput,
    DiscreteState,
    discrete_force_jacobians,
    evaluate_del,
)
from .errors import (
    NoConvergence,
    NonFiniteState,
    RankDeficientConstraints,
    SingularJacobian,
    UnsupportedOrder,
)
from .forces import ForceJacobianReport, ForceModel, validate_force_jacobians
from .galerkin import GalerkinScheme
from .model import ROOT, KinematicsCache, MechanismModel
from .se3 import ad, ad_dual
from .settings import BUILTIN_SOLVER_DEFAULTS, load_solver_defaults

logger = logging.getLogger(__name__)

# Λ_i 与约束 Schur 矩阵的条件数上限
CONDITION_LIMIT = 1e14
# Armijo 充分下降系数
ARMIJO = 1e-4


@dataclass
class SolverConfig:
    """Newton 迭代参数；backtrack = 1 表示不做线搜索（纯 Newton）。"""

    tol: float = BUILTIN_SOLVER_DEFAULTS["tol"]
    max_iter: int = BUILTIN_SOLVER_DEFAULTS["max_iter"]
    backtrack: float = BUILTIN_SOLVER_DEFAULTS["backtrack"]
    min_step: float = BUILTIN_SOLVER_DEFAULTS["min_step"]

    def __post_init__(self):
        if not (np.isfinite(self.tol) and self.tol > 0.0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not 0.0 < self.backtrack <= 1.0:
            raise ValueError(f"backtrack must lie in (0, 1], got {self.backtrack}")
        if not 0.0 < self.min_step <= 1.0:
            raise ValueError(f"min_step must lie in (0, 1], got {self.min_step}")
        self.max_iter = int(self.max_iter)

    @classmethod
    def from_settings(cls, path: Optional[str] = None) -> "SolverConfig":
        """由 config/solver.json 与 GALINT_NEWTON_* 环境变量构造。"""
        values = load_solver_defaults(path)
        return cls(tol=float(values["tol"]), max_iter=int(values["max_iter"]),
                   backtrack=float(values["backtrack"]), min_step=float(values["min_step"]))


@dataclass
class StepDiagnostics:
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)
    step_lengths: List[float] = field(default_factory=list)
    control_points: Optional[NDArray] = None

    def convergence_constants(self) -> NDArray:
        """相邻迭代的 ‖r_{j+1}‖ / ‖r_j‖²（二次收敛时应有界）。"""
        h = np.asarray(self.history, dtype=float)
        if h.size < 2:
            return np.zeros(0)
        prev, nxt = h[:-1], h[1:]
        ok = prev > 0.0
        return nxt[ok] / prev[ok] ** 2


class StepWorkspace:
    """
    一个 (n, s) 问题的全部递推缓冲区，调用方持有；并发时每个线程各用一份。

    反向遍历写入 D/G/Π/Ψ/H/Φ/Θ/Ξ/Λ/X/Y，右端项遍历写入 l/ζ/ξ̄/y，
    前向遍历写入 η̄、δ̄v̄ 与 δq。
    """

    def __init__(self, n: int, s: int):
        N = s + 1
        self.n = n
        self.s = s
        self.D = np.zeros((n, N, N, 6, 6))
        self.G = np.zeros((n, N, N, 6, 6))
        self.Pi = np.zeros((n, N, N, 6, 6))
        self.Psi = np.zeros((n, N, N, 6, 6))
        self.l = np.zeros((n, N, 6))
        self.zeta = np.zeros((n, N, 6))
        self.H = np.zeros((n, N, N, 6))
        self.Phi = np.zeros((n, N, N, 6))
        self.Theta = np.zeros((n, s, N, 6))
        self.Theta_bar = np.zeros((n, s, N, 6))
        self.Xi = np.zeros((n, s, N, 6))
        self.Xi_bar = np.zeros((n, s, N, 6))
        self.xi_bar = np.zeros((n, s))
        self.Lam = np.zeros((n, s, s))
        self.Lam_inv = np.zeros((n, s, s))
        self.X = np.zeros((n, s, N, 6))
        self.Y = np.zeros((n, s, N, 6))
        self.y = np.zeros((n, s))
        # 向父刚体传递时 δq 的系数：H − δ ad^D_μ̄ S̄ 与 Φ − δ ad^D_Γ̄ S̄
        self.K_mu = np.zeros((n, N, N, 6))
        self.K_gamma = np.zeros((n, N, N, 6))
        self.eta = np.zeros((n, N, 6))
        self.dv = np.zeros((n, N, 6))
        self.dq = np.zeros((n, N))
        self.D1F = np.zeros((n, N, 6, 6))
        self.D2F = np.zeros((n, N, 6, 6))
        self.D1Q = np.zeros((n, N))
        self.D2Q = np.zeros((n, N))
        self.scheme: Optional[GalerkinScheme] = None
        self.cache: Optional[KinematicsCache] = None
        self.parents: Optional[NDArray] = None
        self.dt = 0.0
        self.factorized = False

    @classmethod
    def allocate(cls, n: int, s: int) -> "StepWorkspace":
        return cls(n, s)

    def matches(self, model: MechanismModel, scheme: GalerkinScheme) -> bool:
        return self.n == model.n and self.s == scheme.s


def _workspace_for(model: MechanismModel, scheme: GalerkinScheme,
                   workspace: Optional[StepWorkspace]) -> StepWorkspace:
    if workspace is None or not workspace.matches(model, scheme):
        return StepWorkspace(model.n, scheme.s)
    return workspace


def factorize(model: MechanismModel, scheme: GalerkinScheme, del_output: DelOutput,
              force_model: Optional[ForceModel] = None,
              workspace: Optional[StepWorkspace] = None) -> StepWorkspace:
    """
    反向遍历中与残差无关的部分：D, G, Π, Ψ, H, Φ, Θ̄, Ξ̄, Λ⁻¹, X, Y。

    Raises:
        SingularJacobian: 某个 Λ_i 的条件数超过 CONDITION_LIMIT
    """
    ws = _workspace_for(model, scheme, workspace)
    cache = del_output.cache
    dt = del_output.dt
    s, N = scheme.s, scheme.num_nodes
    w_dt = scheme.weights * dt
    b = scheme.diff_matrix
    a = scheme.a_matrix[:s]
    idx = np.arange(N)

    ws.D1F, ws.D2F, ws.D1Q, ws.D2Q = discrete_force_jacobians(
        model, scheme, cache, force_model, del_output.controls, del_output.times, dt)
    for buf in (ws.D, ws.G, ws.Pi, ws.Psi):
        buf.fill(0.0)

    parents = model.parents
    for i in range(model.n - 1, -1, -1):
        Sb, Sd, vb = cache.Sbar[i], cache.Sdot[i], cache.vbar[i]
        mu, gam = del_output.mu[i], del_output.gamma[i]
        D, G, Pi, Psi = ws.D[i], ws.G[i], ws.Pi[i], ws.Psi[i]

        D[idx, idx] += cache.Mbar[i]
        Pi[idx, idx] += ws.D2F[i]
        Psi[idx, idx] += ws.D1F[i] + ad_dual(del_output.wrench[i]) - ws.D2F[i] @ ad(vb)

        DS = np.einsum("arkl,rl->ark", D, Sb)
        PiS = np.einsum("arkl,rl->ark", Pi, Sb)
        H = (np.einsum("agkl,gl->agk", D, Sd) + np.einsum("agkl,gl->agk", G, Sb)
             + np.einsum("rg,ark->agk", b, DS) / dt)
        Phi = (np.einsum("agkl,gl->agk", Pi, Sd) + np.einsum("agkl,gl->agk", Psi, Sb)
               + np.einsum("rg,ark->agk", b, PiS) / dt)
        H[:, 0] = 0.0
        Phi[:, 0] = 0.0
        ws.H[i], ws.Phi[i] = H, Phi

        ad_mu = ad_dual(mu)
        Sb_ad_mu = np.einsum("ak,akl->al", Sb, ad_mu)
        SbD = np.einsum("ak,arkl->arl", Sb, D)
        SbG = np.einsum("ak,ankl->anl", Sb, G)

        Theta = w_dt[:, None, None] * np.einsum("ak,arkl->arl", Sd, D) + np.einsum("ak,arkl->arl", Sb, Pi)
        Theta[idx, idx] += w_dt[:, None] * Sb_ad_mu
        Xi = w_dt[:, None, None] * np.einsum("ak,ankl->anl", Sd, G) + np.einsum("ak,ankl->anl", Sb, Psi)
        ws.Theta[i] = Theta[:s]
        ws.Xi[i] = Xi[:s]
        ws.Theta_bar[i] = Theta[:s] + np.einsum("ab,brl->arl", a, SbD)
        ws.Xi_bar[i] = Xi[:s] + np.einsum("ab,bnl->anl", a, SbG)

        SbH = np.einsum("ak,agk->ag", Sb, H)
        Lam = (w_dt[:, None] * np.einsum("ak,agk->ag", Sd, H)
               + np.einsum("ak,agk->ag", Sb, Phi))[:s] + a @ SbH
        Lam[idx[:s], idx[:s]] += ws.D1Q[i, :s] + w_dt[:s] * np.einsum("al,al->a", Sb_ad_mu, Sd)[:s]
        Lam += b[:s] * ws.D2Q[i, :s, None] / dt
        Lam = Lam[:, 1:]
        ws.Lam[i] = Lam

        condition = np.linalg.cond(Lam) if np.all(np.isfinite(Lam)) else np.inf
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            logger.warning(f"[NEWTON] Lambda singular at body {i} (cond={condition:.3e})")
            raise SingularJacobian(body=i, node=None, condition=float(condition))
        ws.Lam_inv[i] = lu_solve(lu_factor(Lam), np.eye(s))

        ws.X[i] = -np.einsum("gr,rpk->gpk", ws.Lam_inv[i], ws.Theta_bar[i])
        ws.Y[i] = -np.einsum("gr,rpk->gpk", ws.Lam_inv[i], ws.Xi_bar[i])

        K_mu = H.copy()
        K_mu[idx, idx] -= np.einsum("akl,al->ak", ad_mu, Sb)
        K_gamma = Phi.copy()
        K_gamma[idx, idx] -= np.einsum("akl,al->ak", ad_dual(gam), Sb)
        ws.K_mu[i], ws.K_gamma[i] = K_mu, K_gamma

        par = parents[i]
        if par != ROOT:
            X = np.zeros((N, N, 6))
            Y = np.zeros((N, N, 6))
            X[1:], Y[1:] = ws.X[i], ws.Y[i]
            ws.D[par] += D + np.einsum("agk,grl->arkl", K_mu, X)
            ws.G[par] += G + np.einsum("agk,gnl->ankl", K_mu, Y)
            ws.Pi[par] += Pi + np.einsum("agk,grl->arkl", K_gamma, X)
            ws.Psi[par] += Psi + np.einsum("agk,gnl->ankl", K_gamma, Y)

    ws.scheme, ws.cache, ws.parents, ws.dt = scheme, cache, parents, dt
    ws.factorized = True
    return ws


def solve_factored(workspace: StepWorkspace, residuals: NDArray) -> NDArray:
    """
    在已分解的工作区上求 −J⁻¹r：右端项反向遍历（l, ζ, ξ̄, y）+ 前向遍历。

    Args:
        residuals: (s, n)，与 DelOutput.residuals 同布局

    Returns:
        δq̄，形状 (s, n)，对应节点 1..s
    """
    ws = workspace
    if not ws.factorized:
        raise RuntimeError("workspace has not been factorized")
    scheme, cache, parents, dt = ws.scheme, ws.cache, ws.parents, ws.dt
    s, N = scheme.s, scheme.num_nodes
    w_dt = scheme.weights * dt
    a = scheme.a_matrix[:s]
    b = scheme.diff_matrix
    r = np.asarray(residuals, dtype=float).reshape(s, ws.n)

    ws.l.fill(0.0)
    ws.zeta.fill(0.0)
    for i in range(ws.n - 1, -1, -1):
        Sb, Sd = cache.Sbar[i], cache.Sdot[i]
        l, zeta = ws.l[i], ws.zeta[i]
        xi = (w_dt * np.einsum("ak,ak->a", Sd, l) + np.einsum("ak,ak->a", Sb, zeta))[:s]
        ws.xi_bar[i] = xi + a @ np.einsum("ak,ak->a", Sb, l)
        ws.y[i] = -ws.Lam_inv[i] @ (r[:, i] + ws.xi_bar[i])
        par = parents[i]
        if par != ROOT:
            y = np.zeros(N)
            y[1:] = ws.y[i]
            ws.l[par] += l + np.einsum("agk,g->ak", ws.K_mu[i], y)
            ws.zeta[par] += zeta + np.einsum("agk,g->ak", ws.K_gamma[i], y)

    zero = np.zeros((N, 6))
    for i in range(ws.n):
        par = parents[i]
        dv_par = zero if par == ROOT else ws.dv[par]
        eta_par = zero if par == ROOT else ws.eta[par]
        dq = np.zeros(N)
        dq[1:] = (np.einsum("grk,rk->g", ws.X[i], dv_par)
                  + np.einsum("gnk,nk->g", ws.Y[i], eta_par) + ws.y[i])
        dqdot = b @ dq / dt
        ws.dq[i] = dq
        ws.eta[i] = eta_par + cache.Sbar[i] * dq[:, None]
        ws.dv[i] = dv_par + cache.Sdot[i] * dq[:, None] + cache.Sbar[i] * dqdot[:, None]
    return ws.dq[:, 1:].T.copy()


def newton_direction(model: MechanismModel, scheme: GalerkinScheme, cache: Optional[KinematicsCache],
                     del_output: DelOutput, force_model: Optional[ForceModel] = None,
                     workspace: Optional[StepWorkspace] = None) -> NDArray:
    """
    δq̄ᵏ = −J⁻¹(q̄ᵏ) rᵏ，O(s³n)。

    cache 必须与 del_output 来自同一组控制点；传 None 时使用 del_output.cache。

    Returns:
        (s, n)，节点 1..s 的修正量
    """
    if cache is not None and cache is not del_output.cache and not np.allclose(cache.q.T, del_output.qbar):
        raise ValueError("kinematics cache does not belong to the given DEL evaluation")
    ws = factorize(model, scheme, del_output, force_model, workspace)
    dq = solve_factored(ws, del_output.residuals)
    if not np.all(np.isfinite(dq)):
        raise NonFiniteState("Newton direction")
    return dq


def warm_start(scheme: GalerkinScheme, q0: NDArray, previous_q: Optional[NDArray] = None) -> NDArray:
    """q^{k,α} = q^{k,0} + cᵅ(q^{k,0} − q^{k−1,0})；首步取常数。"""
    q0 = np.asarray(q0, dtype=float)
    if previous_q is None:
        return np.tile(q0, (scheme.num_nodes, 1))
    delta = q0 - np.asarray(previous_q, dtype=float)
    return q0[None, :] + scheme.nodes[:, None] * delta[None, :]


def _line_search(evaluate: Callable[[float], Tuple[object, float]], current: float,
                 config: SolverConfig) -> Tuple[object, float, float]:
    """回溯线搜索：Armijo 条件 ‖r(t)‖∞ ≤ (1 − 1e-4·t)‖r‖∞；步长低于 min_step 时接受最后一次试探。"""
    t = 1.0
    while True:
        trial, norm = evaluate(t)
        if config.backtrack >= 1.0:
            return trial, norm, t
        if np.isfinite(norm) and norm <= (1.0 - ARMIJO * t) * current:
            return trial, norm, t
        if t * config.backtrack < config.min_step:
            return trial, norm, t
        t *= config.backtrack


def step(model: MechanismModel, scheme: GalerkinScheme, state: DiscreteState,
         force_model: Optional[ForceModel] = None, controls: Controls = None, *,
         dt: float, config: Optional[SolverConfig] = None, previous_q: Optional[NDArray] = None,
         workspace: Optional[StepWorkspace] = None) -> Tuple[DiscreteState, StepDiagnostics]:
    """
    一个隐式时间步：Newton 求解残差方程得到 q^{k,1..s}，再由末节点方程得到 p^{k+1}。

    iterations 统计残差检查的次数，初值已是根时为 1。

    Raises:
        NoConvergence: max_iter 次内 ‖r‖∞ 未降到 tol 以下
        SingularJacobian: 递推中某个 Λ_i 奇异
        NonFiniteState: 状态或试探点出现 NaN/Inf
    """
    config = config or SolverConfig()
    if not state.is_finite:
        raise NonFiniteState("input state")
    ws = _workspace_for(model, scheme, workspace)
    t0 = state.k * dt
    s = scheme.s

    def evaluate(qbar):
        return evaluate_del(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)

    qbar = warm_start(scheme, state.q, previous_q)
    out = evaluate(qbar)
    history: List[float] = []
    lengths: List[float] = []
    for iteration in range(1, config.max_iter + 1):
        norm = out.residual_norm
        history.append(norm)
        if not np.isfinite(norm):
            raise NonFiniteState(f"DEL residual at iteration {iteration}")
        logger.debug(f"[NEWTON] k={state.k} iter={iteration} |r|={norm:.3e}")
        if norm < config.tol:
            next_state = DiscreteState(q=out.qbar[s], p=out.next_momentum, k=state.k + 1)
            if not next_state.is_finite:
                raise NonFiniteState("next state")
            return next_state, StepDiagnostics(iterations=iteration, residual=norm, history=history,
                                               step_lengths=lengths, control_points=out.qbar.copy())
        if iteration == config.max_iter:
            break
        dq = newton_direction(model, scheme, out.cache, out, force_model, ws)

        def trial(t, base=out.qbar, dq=dq):
            candidate = base.copy()
            candidate[1:] += t * dq
            res = evaluate(candidate)
            return res, res.residual_norm

        out, _, length = _line_search(trial, norm, config)
        lengths.append(length)

    logger.warning(f"[NEWTON] Step k={state.k} did not converge: |r|={history[-1]:.3e} "
                   f"after {len(history)} iteration(s)")
    raise NoConvergence(len(history), history[-1], history)


def rollout(model: MechanismModel, scheme: GalerkinScheme, state: DiscreteState, steps: int,
            force_model: Optional[ForceModel] = None, controls: Controls = None, *,
            dt: float, config: Optional[SolverConfig] = None,
            workspace: Optional[StepWorkspace] = None,
            callback: Optional[Callable[[DiscreteState, StepDiagnostics], None]] = None,
            ) -> Tuple[List[DiscreteState], List[StepDiagnostics]]:
    """连续调用 step，控制点按上一步外推热启动。返回包含初始状态在内的 steps+1 个状态。"""
    ws = _workspace_for(model, scheme, workspace)
    states = [state]
    diagnostics: List[StepDiagnostics] = []
    previous_q = None
    for _ in range(steps):
        current = states[-1]
        nxt, diag = step(model, scheme, current, force_model, controls, dt=dt, config=config,
                         previous_q=previous_q, workspace=ws)
        previous_q = current.q
        states.append(nxt)
        diagnostics.append(diag)
        if callback is not None:
            callback(nxt, diag)
    return states, diagnostics


@dataclass
class ConstrainedStepResult:
    state: DiscreteState
    multipliers: NDArray
    diagnostics: StepDiagnostics


def constrained_step_second_order(model: MechanismModel, scheme: GalerkinScheme, state: DiscreteState,
                                  force_model: Optional[ForceModel], constraints: Optional[Constraint],
                                  controls: Controls = None, *, dt: float,
                                  config: Optional[SolverConfig] = None,
                                  previous_q: Optional[NDArray] = None,
                                  multipliers: Optional[NDArray] = None,
                                  workspace: Optional[StepWorkspace] = None) -> ConstrainedStepResult:
    """
    s = 1 的约束步：

        pᵏ + 𝔻₁𝓛_d + 𝓕_d⁰ + A(qᵏ)λᵏ = 0,   h(q^{k+1}, q̇^{k+1}) = 0

    每次迭代 δq_r = −J⁻¹r_q，J⁻¹A 复用同一分解 m 次，
    δλ = (𝔻h J⁻¹A)⁻¹(r_c + 𝔻h δq_r)，δq = δq_r − J⁻¹A δλ。

    Raises:
        UnsupportedOrder: s ≠ 1
        RankDeficientConstraints: m×m Schur 矩阵奇异
        NoConvergence: max_iter 次内未收敛
    """
    if scheme.s != 1:
        raise UnsupportedOrder(scheme.s, "constrained step supports s = 1 only")
    m = 0 if constraints is None else constraints.dim
    if m == 0:
        nxt, diag = step(model, scheme, state, force_model, controls, dt=dt, config=config,
                         previous_q=previous_q, workspace=workspace)
        return ConstrainedStepResult(state=nxt, multipliers=np.zeros(0), diagnostics=diag)
    if m >= model.n:
        raise ValueError(f"constraint count m={m} must be smaller than n={model.n}")

    config = config or SolverConfig()
    if not state.is_finite:
        raise NonFiniteState("input state")
    ws = _workspace_for(model, scheme, workspace)
    t0 = state.k * dt
    b = scheme.diff_matrix
    A0 = constraints.force_matrix(model, state.q)

    def evaluate(qbar, lam):
        out = evaluate_del(model, scheme, qbar, state.p, force_model, controls, dt=dt, t0=t0)
        qdot1 = b[1] @ out.qbar / dt
        r_q = out.residuals[0] + A0 @ lam
        r_c = constraints.value(model, out.qbar[1], qdot1)
        norm = float(max(np.abs(r_q).max(), np.abs(r_c).max()))
        return out, r_q, r_c, norm

    qbar = warm_start(scheme, state.q, previous_q)
    lam = np.zeros(m) if multipliers is None else np.asarray(multipliers, dtype=float).reshape(m)
    out, r_q, r_c, norm = evaluate(qbar, lam)
    history: List[float] = []
    lengths: List[float] = []
    for iteration in range(1, config.max_iter + 1):
        history.append(norm)
        if not np.isfinite(norm):
            raise NonFiniteState(f"constrained residual at iteration {iteration}")
        logger.debug(f"[CONSTRAINED] k={state.k} iter={iteration} |r|={norm:.3e}")
        if norm < config.tol:
            nxt = DiscreteState(q=out.qbar[1], p=out.next_momentum, k=state.k + 1)
            diag = StepDiagnostics(iterations=iteration, residual=norm, history=history,
                                   step_lengths=lengths, control_points=out.qbar.copy())
            return ConstrainedStepResult(state=nxt, multipliers=lam.copy(), diagnostics=diag)
        if iteration == config.max_iter:
            break

        factorize(model, scheme, out, force_model, ws)
        dq_r = solve_factored(ws, r_q[None, :])[0]
        JinvA = np.column_stack([-solve_factored(ws, A0[:, c][None, :])[0] for c in range(m)])
        q1 = out.qbar[1]
        dh_dq, dh_dqdot = constraints.jacobians(model, q1, b[1] @ out.qbar / dt)
        Dh = dh_dq + dh_dqdot * (b[1, 1] / dt)
        schur = Dh @ JinvA
        condition = np.linalg.cond(schur) if np.all(np.isfinite(schur)) else np.inf
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            logger.warning(f"[CONSTRAINED] Schur complement singular (cond={condition:.3e})")
            raise RankDeficientConstraints(float(condition))
        dlam = lu_solve(lu_factor(schur), r_c + Dh @ dq_r)
        dq = dq_r - JinvA @ dlam

        def trial(t, base=out.qbar, lam0=lam, dq=dq, dlam=dlam):
            candidate = base.copy()
            candidate[1] += t * dq
            res = evaluate(candidate, lam0 + t * dlam)
            return (res, lam0 + t * dlam), res[3]

        (result, lam), _, length = _line_search(trial, norm, config)
        out, r_q, r_c, norm = result
        lengths.append(length)

    logger.warning(f"[CONSTRAINED] Step k={state.k} did not converge: |r|={history[-1]:.3e}")
    raise NoConvergence(len(history), history[-1], history)


def assemble_jacobian(model: MechanismModel, scheme: GalerkinScheme, del_output: DelOutput,
                      force_model: Optional[ForceModel] = None,
                      workspace: Optional[StepWorkspace] = None) -> NDArray:
    """
    由单位残差逐列求 J⁻¹ 再取逆得到 sn×sn 的 J（仅供检查，O(s³n²)）。

    行/列按 (节点, 刚体) 展平：索引 α·n + i。
    """
    ws = factorize(model, scheme, del_output, force_model, workspace)
    s, n = scheme.s, model.n
    size = s * n
    inv = np.zeros((size, size))
    for col in range(size):
        e = np.zeros(size)
        e[col] = 1.0
        inv[:, col] = -solve_factored(ws, e.reshape(s, n)).reshape(size)
    return np.linalg.inv(inv)


__all__ = [
    "CONDITION_LIMIT",
    "SolverConfig",
    "StepDiagnostics",
    "StepWorkspace",
    "ConstrainedStepResult",
    "ForceJacobianReport",
    "factorize",
    "solve_factored",
    "newton_direction",
    "warm_start",
    "step",
    "rollout",
    "constrained_step_second_order",
    "assemble_jacobian",
    "validate_force_jacobians",
]
