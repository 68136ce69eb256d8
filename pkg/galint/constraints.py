"""
约束接口：h(q, q̇) = 0 与约束力矩阵 A(q)。

A(q) 默认取 (∂h/∂q)ᵀ（完整约束的常用选择）。
"""

from typing import Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .model import MechanismModel, kinematics


class Constraint:
    """约束基类：子类提供 dim、value、jacobians。"""

    dim: int = 0

    def value(self, model: MechanismModel, q: NDArray, qdot: NDArray) -> NDArray:
        raise NotImplementedError

    def jacobians(self, model: MechanismModel, q: NDArray, qdot: NDArray) -> Tuple[NDArray, NDArray]:
        """(∂h/∂q, ∂h/∂q̇)，形状均为 (m, n)。"""
        raise NotImplementedError

    def force_matrix(self, model: MechanismModel, q: NDArray) -> NDArray:
        """A(q)，形状 (n, m)。"""
        dq, _ = self.jacobians(model, q, np.zeros(model.n))
        return dq.T


class JointLock(Constraint):
    """h = q_j − value。"""

    dim = 1

    def __init__(self, joint: int, value: float = 0.0):
        self.joint = int(joint)
        self.target = float(value)

    def value(self, model, q, qdot):
        return np.array([np.asarray(q, dtype=float)[self.joint] - self.target])

    def jacobians(self, model, q, qdot):
        dq = np.zeros((1, model.n))
        dq[0, self.joint] = 1.0
        return dq, np.zeros((1, model.n))


class PointOnSphere(Constraint):
    """
    刚体原点保持在球面（平面运动时即圆）上：h = ‖p_body − c‖² − r²。

    ∂p/∂q_j = n̄_j + s̄_j × p，j ∈ anc(body) ∪ {body}。
    """

    dim = 1

    def __init__(self, body: int, radius: float, center: Sequence[float] = (0.0, 0.0, 0.0)):
        self.body = int(body)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def _point(self, model, q):
        cache = kinematics(model, np.asarray(q, dtype=float)[None, :], np.zeros((1, model.n)))
        return cache, cache.p[self.body, 0]

    def value(self, model, q, qdot):
        _, p = self._point(model, q)
        d = p - self.center
        return np.array([d @ d - self.radius ** 2])

    def jacobians(self, model, q, qdot):
        cache, p = self._point(model, q)
        d = p - self.center
        dq = np.zeros((1, model.n))
        for j in model.supports(self.body):
            S = cache.Sbar[j, 0]
            dq[0, j] = 2.0 * d @ (S[3:] + np.cross(S[:3], p))
        return dq, np.zeros((1, model.n))


class ConstraintSet(Constraint):
    """把多个约束按行堆叠；空集合表示无约束 (m = 0)。"""

    def __init__(self, *constraints: Constraint):
        self.constraints = tuple(constraints)
        self.dim = int(sum(c.dim for c in self.constraints))

    def value(self, model, q, qdot):
        if not self.constraints:
            return np.zeros(0)
        return np.concatenate([c.value(model, q, qdot) for c in self.constraints])

    def jacobians(self, model, q, qdot):
        if not self.constraints:
            return np.zeros((0, model.n)), np.zeros((0, model.n))
        parts = [c.jacobians(model, q, qdot) for c in self.constraints]
        return np.vstack([a for a, _ in parts]), np.vstack([b for _, b in parts])

    def force_matrix(self, model, q):
        if not self.constraints:
            return np.zeros((model.n, 0))
        return np.hstack([c.force_matrix(model, q) for c in self.constraints])


__all__ = [
    "Constraint",
    "JointLock",
    "PointOnSphere",
    "ConstraintSet",
]
