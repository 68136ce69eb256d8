"""
外力模型接口（空间 wrench F̄_i 与关节力 Q_i）及其 Jacobian。

离散化约定：F̄_i^{k,α} = wᵅ F̄_i(t^{k,α}) Δt，Q_i^{k,α} = wᵅ Q_i(t^{k,α}) Δt，在调用处完成。
D₁F̄ 为对空间左扰动 g -> exp(η̂)g 的导数，D₂F̄ 为对 v̄ 的导数。
没有解析 Jacobian 的模型使用中心差分（逐刚体，不破坏 O(n) 递推结构）。

重力不属于力模型，由 model.gravity_wrench 处理。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .se3 import SpatialTransform, exp_se3

logger = logging.getLogger(__name__)

FD_REL_STEP = 1e-7
FD_MIN_STEP = 1e-7


def _fd_step(x: float, rel: float = FD_REL_STEP, floor: float = FD_MIN_STEP) -> float:
    return max(floor, rel * abs(x))


class ForceModel:
    """
    力模型基类：零力，Jacobian 默认由中心差分给出。

    子类覆盖 body_wrench / joint_force；若提供解析导数，覆盖 *_jacobians
    并把 analytic_jacobians 设为 True。
    """

    analytic_jacobians = False
    has_body_wrench = False
    has_joint_force = False

    def body_wrench(self, i: int, g: SpatialTransform, vbar: NDArray,
                    u: Optional[NDArray], t: float) -> NDArray:
        return np.zeros(6)

    def joint_force(self, i: int, q: float, qdot: float, u: Optional[NDArray], t: float) -> float:
        return 0.0

    def body_wrench_jacobians(self, i, g, vbar, u, t) -> Tuple[NDArray, NDArray]:
        return self.fd_body_wrench_jacobians(i, g, vbar, u, t)

    def joint_force_jacobians(self, i, q, qdot, u, t) -> Tuple[float, float]:
        return self.fd_joint_force_jacobians(i, q, qdot, u, t)

    def fd_body_wrench_jacobians(self, i, g: SpatialTransform, vbar: NDArray, u, t,
                                 rel_step: float = FD_REL_STEP,
                                 min_step: float = FD_MIN_STEP) -> Tuple[NDArray, NDArray]:
        """(D₁F̄, D₂F̄) 的中心差分。"""
        D1 = np.zeros((6, 6))
        D2 = np.zeros((6, 6))
        if not self.has_body_wrench:
            return D1, D2
        vbar = np.asarray(vbar, dtype=float)
        for k in range(6):
            h = min_step
            e = np.zeros(6)
            e[k] = h
            plus = self.body_wrench(i, exp_se3(e) @ g, vbar, u, t)
            minus = self.body_wrench(i, exp_se3(-e) @ g, vbar, u, t)
            D1[:, k] = (plus - minus) / (2.0 * h)
            h = _fd_step(vbar[k], rel_step, min_step)
            dv = np.zeros(6)
            dv[k] = h
            plus = self.body_wrench(i, g, vbar + dv, u, t)
            minus = self.body_wrench(i, g, vbar - dv, u, t)
            D2[:, k] = (plus - minus) / (2.0 * h)
        return D1, D2

    def fd_joint_force_jacobians(self, i, q: float, qdot: float, u, t,
                                 rel_step: float = FD_REL_STEP,
                                 min_step: float = FD_MIN_STEP) -> Tuple[float, float]:
        """(D₁Q, D₂Q) 的中心差分。"""
        if not self.has_joint_force:
            return 0.0, 0.0
        h = _fd_step(q, rel_step, min_step)
        d1 = (self.joint_force(i, q + h, qdot, u, t) - self.joint_force(i, q - h, qdot, u, t)) / (2.0 * h)
        h = _fd_step(qdot, rel_step, min_step)
        d2 = (self.joint_force(i, q, qdot + h, u, t) - self.joint_force(i, q, qdot - h, u, t)) / (2.0 * h)
        return float(d1), float(d2)


class ZeroForce(ForceModel):
    """显式的零力模型。"""

    analytic_jacobians = True

    def body_wrench_jacobians(self, i, g, vbar, u, t):
        return np.zeros((6, 6)), np.zeros((6, 6))

    def joint_force_jacobians(self, i, q, qdot, u, t):
        return 0.0, 0.0


class JointDamping(ForceModel):
    """线性粘性关节阻尼 Q_i = −c_i q̇_i。"""

    analytic_jacobians = True
    has_joint_force = True

    def __init__(self, coefficient):
        self.coefficient = coefficient

    def _c(self, i: int) -> float:
        c = self.coefficient
        return float(c[i]) if np.ndim(c) else float(c)

    def joint_force(self, i, q, qdot, u, t):
        return -self._c(i) * qdot

    def joint_force_jacobians(self, i, q, qdot, u, t):
        return 0.0, -self._c(i)

    def body_wrench_jacobians(self, i, g, vbar, u, t):
        return np.zeros((6, 6)), np.zeros((6, 6))


class JointTorques(ForceModel):
    """控制输入直接作为关节力：Q_i = u_i（u 为 None 时为零）。"""

    analytic_jacobians = True
    has_joint_force = True

    def joint_force(self, i, q, qdot, u, t):
        if u is None:
            return 0.0
        return float(np.asarray(u, dtype=float)[i])

    def joint_force_jacobians(self, i, q, qdot, u, t):
        return 0.0, 0.0

    def body_wrench_jacobians(self, i, g, vbar, u, t):
        return np.zeros((6, 6)), np.zeros((6, 6))


class QuadraticDrag(ForceModel):
    """非线性阻力 F̄_i = −c ‖v̄_i‖ v̄_i（空间坐标下）。"""

    analytic_jacobians = True
    has_body_wrench = True

    def __init__(self, coefficient: float):
        self.coefficient = float(coefficient)

    def body_wrench(self, i, g, vbar, u, t):
        v = np.asarray(vbar, dtype=float)
        return -self.coefficient * np.linalg.norm(v) * v

    def body_wrench_jacobians(self, i, g, vbar, u, t):
        v = np.asarray(vbar, dtype=float)
        speed = float(np.linalg.norm(v))
        D2 = np.zeros((6, 6))
        if speed > 0.0:
            D2 = -self.coefficient * (speed * np.eye(6) + np.outer(v, v) / speed)
        return np.zeros((6, 6)), D2


class ForceSum(ForceModel):
    """若干力模型之和。"""

    def __init__(self, *models: ForceModel):
        self.models = tuple(models)
        self.analytic_jacobians = all(m.analytic_jacobians for m in self.models)
        self.has_body_wrench = any(m.has_body_wrench for m in self.models)
        self.has_joint_force = any(m.has_joint_force for m in self.models)

    def body_wrench(self, i, g, vbar, u, t):
        total = np.zeros(6)
        for m in self.models:
            if m.has_body_wrench:
                total = total + m.body_wrench(i, g, vbar, u, t)
        return total

    def joint_force(self, i, q, qdot, u, t):
        return float(sum(m.joint_force(i, q, qdot, u, t) for m in self.models if m.has_joint_force))

    def body_wrench_jacobians(self, i, g, vbar, u, t):
        D1 = np.zeros((6, 6))
        D2 = np.zeros((6, 6))
        for m in self.models:
            if m.has_body_wrench:
                a, b = m.body_wrench_jacobians(i, g, vbar, u, t)
                D1 = D1 + a
                D2 = D2 + b
        return D1, D2

    def joint_force_jacobians(self, i, q, qdot, u, t):
        d1 = d2 = 0.0
        for m in self.models:
            if m.has_joint_force:
                a, b = m.joint_force_jacobians(i, q, qdot, u, t)
                d1 += a
                d2 += b
        return d1, d2


@dataclass
class ForceJacobianReport:
    """解析 Jacobian 与中心差分的最大相对误差（分母下限为 1）。"""

    samples: int
    analytic: bool
    max_rel_error: Dict[str, float] = field(default_factory=dict)

    def passed(self, tol: float = 1e-5) -> bool:
        return all(err <= tol for err in self.max_rel_error.values())


def _rel_error(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(float(np.abs(b).max()), 1.0))


def validate_force_jacobians(force_model: ForceModel, model, samples: int = 5, seed: int = 0,
                             step: float = 1e-6, controls=None) -> ForceJacobianReport:
    """
    在随机采样状态上比较 D₁F̄、D₂F̄、D₁Q、D₂Q 与中心差分，只报告不抛异常。

    Args:
        force_model: 待检查的力模型
        model: MechanismModel
        samples: 采样状态数
        step: 差分步长
        controls: 可选的 u(t)
    """
    from .model import kinematics

    rng = np.random.default_rng(seed)
    errors = {"D1F": 0.0, "D2F": 0.0, "D1Q": 0.0, "D2Q": 0.0}
    for _ in range(samples):
        q = rng.uniform(-np.pi / 2, np.pi / 2, size=model.n)
        qdot = rng.uniform(-1.0, 1.0, size=model.n)
        t = float(rng.uniform(0.0, 1.0))
        u = None if controls is None else controls(t)
        cache = kinematics(model, q[None, :], qdot[None, :])
        for i in range(model.n):
            g = cache.transform(i, 0)
            v = cache.vbar[i, 0]
            D1, D2 = force_model.body_wrench_jacobians(i, g, v, u, t)
            F1, F2 = force_model.fd_body_wrench_jacobians(i, g, v, u, t, rel_step=step, min_step=step)
            errors["D1F"] = max(errors["D1F"], _rel_error(D1, F1))
            errors["D2F"] = max(errors["D2F"], _rel_error(D2, F2))
            d1, d2 = force_model.joint_force_jacobians(i, q[i], qdot[i], u, t)
            f1, f2 = force_model.fd_joint_force_jacobians(i, q[i], qdot[i], u, t, rel_step=step, min_step=step)
            errors["D1Q"] = max(errors["D1Q"], _rel_error(d1, f1))
            errors["D2Q"] = max(errors["D2Q"], _rel_error(d2, f2))
    report = ForceJacobianReport(samples=samples, analytic=force_model.analytic_jacobians, max_rel_error=errors)
    logger.info(f"[FORCES] Jacobian check for {type(force_model).__name__}: {errors}")
    return report


__all__ = [
    "ForceModel",
    "ZeroForce",
    "JointDamping",
    "JointTorques",
    "QuadraticDrag",
    "ForceSum",
    "ForceJacobianReport",
    "validate_force_jacobians",
]
