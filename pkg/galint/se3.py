"""
SE(3)/se(3) 运算核心。

约定：
- 6 维向量一律按 (角; 线) 排列：twist v = (ω, v_O)，wrench F = (τ, f_O)
- 变换 g = (R, p) 只以 (R, p) 存储，4x4 齐次矩阵仅用于调试输出
- Ad_g = [R 0; p̂R R]，ad_v = [ω̂ 0; v̂_O ω̂]，ad^D_F = [τ̂ f̂; f̂ 0]

带 `_batch` / `*_apply` 的函数对前导维度做向量化，供前向/反向递推使用。
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

# hat 的逆运算允许的对称部分上限
SKEW_TOL = 1e-9
# Rodrigues 系数切换到 Taylor 展开的阈值
SMALL_ANGLE = 1e-9


def hat(w: NDArray) -> NDArray:
    """3 维向量 -> 3x3 反对称矩阵，支持任意前导维度。"""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    x, y, z = w[..., 0], w[..., 1], w[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee(m: NDArray) -> NDArray:
    """
    hat 的逆运算。

    Raises:
        ValueError: 输入形状不是 3x3，或对称部分超过 SKEW_TOL（输入已损坏）
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (3, 3):
        raise ValueError(f"vee expects 3x3 matrices, got shape {m.shape}")
    asym = np.abs(m + np.swapaxes(m, -1, -2)).max() if m.size else 0.0
    if asym > SKEW_TOL:
        raise ValueError(f"matrix is not skew-symmetric (|M + M^T| = {asym:.3e})")
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def hat6(v: NDArray) -> NDArray:
    """twist 的 4x4 矩阵形式 [ω̂ v_O; 0 0]。"""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (4, 4))
    out[..., :3, :3] = hat(v[..., :3])
    out[..., :3, 3] = v[..., 3:]
    return out


@dataclass(frozen=True, eq=False)
class SpatialTransform:
    """刚体变换 g = (R, p)，把 {B} 中的点映射到 {A}: x_A = R x_B + p。"""

    rotation: NDArray
    translation: NDArray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> "SpatialTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: NDArray) -> "SpatialTransform":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @property
    def R(self) -> NDArray:
        return self.rotation

    @property
    def p(self) -> NDArray:
        return self.translation

    def __matmul__(self, other: "SpatialTransform") -> "SpatialTransform":
        return SpatialTransform(self.R @ other.R, self.R @ other.p + self.p)

    def inverse(self) -> "SpatialTransform":
        Rt = self.R.T
        return SpatialTransform(Rt, -Rt @ self.p)

    def apply(self, point: NDArray) -> NDArray:
        return self.R @ np.asarray(point, dtype=float) + self.p

    def as_matrix(self) -> NDArray:
        """4x4 齐次矩阵（仅供调试/打印）。"""
        out = np.eye(4)
        out[:3, :3] = self.R
        out[:3, 3] = self.p
        return out

    def orthonormality_error(self) -> float:
        """max(|RᵀR − I|, |det R − 1|)。"""
        R = self.R
        return float(max(np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0)))

    def is_valid(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.p))
                    and self.orthonormality_error() <= tol)


def _rodrigues_coefficients(theta: NDArray) -> Tuple[NDArray, NDArray, NDArray]:
    """A = sinθ/θ, B = (1−cosθ)/θ², C = (θ−sinθ)/θ³，小角度时用 Taylor 展开。"""
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    A = np.where(small, 1.0 - t2 / 6.0, np.sin(t) / t)
    B = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(t)) / (t * t))
    C = np.where(small, 1.0 / 6.0 - t2 / 120.0, (t - np.sin(t)) / (t * t * t))
    return A, B, C


def exp_twist_batch(S: NDArray, q: NDArray) -> Tuple[NDArray, NDArray]:
    """
    exp(Ŝ q) 对一组标量 q 的批量版本。

    Args:
        S: joint twist (s; n)，形状 (6,)
        q: 形状 (N,) 的坐标

    Returns:
        (R, p)，形状 (N,3,3) 和 (N,3)
    """
    S = np.asarray(S, dtype=float)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    w = q[:, None] * S[:3]
    u = q[:, None] * S[3:]
    theta = np.linalg.norm(w, axis=-1)
    A, B, C = _rodrigues_coefficients(theta)
    W = hat(w)
    W2 = W @ W
    eye = np.eye(3)
    R = eye + A[:, None, None] * W + B[:, None, None] * W2
    V = eye + B[:, None, None] * W + C[:, None, None] * W2
    p = np.einsum("nij,nj->ni", V, u)
    return R, p


def exp_twist(S: NDArray, q: float) -> SpatialTransform:
    """exp(Ŝq)：旋转部分用 Rodrigues 公式，平移部分用标准螺旋公式。"""
    R, p = exp_twist_batch(S, np.array([q], dtype=float))
    return SpatialTransform(R[0], p[0])


def exp_se3(xi: NDArray) -> SpatialTransform:
    """一般 twist ξ 的指数 exp(ξ̂)，即 exp_twist(ξ, 1)。"""
    return exp_twist(xi, 1.0)


def adjoint(g: SpatialTransform) -> NDArray:
    """Ad_g = [R 0; p̂R R]。"""
    out = np.zeros((6, 6))
    out[:3, :3] = g.R
    out[3:, 3:] = g.R
    out[3:, :3] = hat(g.p) @ g.R
    return out


def adjoint_inv(g: SpatialTransform) -> NDArray:
    """Ad_{g⁻¹} = [Rᵀ 0; −Rᵀp̂ Rᵀ]，不求 6x6 逆。"""
    Rt = g.R.T
    out = np.zeros((6, 6))
    out[:3, :3] = Rt
    out[3:, 3:] = Rt
    out[3:, :3] = -Rt @ hat(g.p)
    return out


def adjoint_inv_transpose(g: SpatialTransform) -> NDArray:
    """Ad_g^{-T} = [R p̂R; 0 R]，作用于 wrench。"""
    out = np.zeros((6, 6))
    out[:3, :3] = g.R
    out[3:, 3:] = g.R
    out[:3, 3:] = hat(g.p) @ g.R
    return out


def adjoint_batch(R: NDArray, p: NDArray) -> NDArray:
    """批量 Ad_g，R: (...,3,3)，p: (...,3)。"""
    out = np.zeros(R.shape[:-2] + (6, 6))
    out[..., :3, :3] = R
    out[..., 3:, 3:] = R
    out[..., 3:, :3] = hat(p) @ R
    return out


def adjoint_inv_batch(R: NDArray, p: NDArray) -> NDArray:
    """批量 Ad_{g⁻¹}。"""
    Rt = np.swapaxes(R, -1, -2)
    out = np.zeros(R.shape[:-2] + (6, 6))
    out[..., :3, :3] = Rt
    out[..., 3:, 3:] = Rt
    out[..., 3:, :3] = -Rt @ hat(p)
    return out


def ad(v: NDArray) -> NDArray:
    """ad_v = [ω̂ 0; v̂_O ω̂]，支持前导维度。"""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (6, 6))
    w_hat = hat(v[..., :3])
    out[..., :3, :3] = w_hat
    out[..., 3:, 3:] = w_hat
    out[..., 3:, :3] = hat(v[..., 3:])
    return out


def ad_dual(F: NDArray) -> NDArray:
    """ad^D_F = [τ̂ f̂; f̂ 0]，满足 Fᵀ ad_{v1} v2 = v2ᵀ ad^D_F v1。"""
    F = np.asarray(F, dtype=float)
    out = np.zeros(F.shape[:-1] + (6, 6))
    f_hat = hat(F[..., 3:])
    out[..., :3, :3] = hat(F[..., :3])
    out[..., :3, 3:] = f_hat
    out[..., 3:, :3] = f_hat
    return out


def ad_apply(v: NDArray, x: NDArray) -> NDArray:
    """ad_v x = (ω×x_ω, v_O×x_ω + ω×x_v)，不组装矩阵。"""
    w, u = v[..., :3], v[..., 3:]
    xw, xv = x[..., :3], x[..., 3:]
    return np.concatenate([np.cross(w, xw), np.cross(u, xw) + np.cross(w, xv)], axis=-1)


def coad_apply(v: NDArray, F: NDArray) -> NDArray:
    """ad_vᵀ F = ad^D_F v = (τ×ω + f×v_O, f×ω)。"""
    w, u = v[..., :3], v[..., 3:]
    tau, f = F[..., :3], F[..., 3:]
    return np.concatenate([np.cross(tau, w) + np.cross(f, u), np.cross(f, w)], axis=-1)


def transform_twist(R: NDArray, p: NDArray, S: NDArray) -> NDArray:
    """Ad_g S，批量：(R s, p×(R s) + R n)。"""
    Rs = np.einsum("...ij,...j->...i", R, S[..., :3])
    Rn = np.einsum("...ij,...j->...i", R, S[..., 3:])
    return np.concatenate([Rs, np.cross(p, Rs) + Rn], axis=-1)


def left_perturb(R: NDArray, p: NDArray, eta: NDArray) -> Tuple[NDArray, NDArray]:
    """g -> exp(η̂) g（空间系左扰动），返回新的 (R, p)。"""
    g = exp_se3(eta)
    return g.R @ R, g.R @ p + g.p


__all__ = [
    "SKEW_TOL",
    "SMALL_ANGLE",
    "hat",
    "vee",
    "hat6",
    "SpatialTransform",
    "exp_twist",
    "exp_twist_batch",
    "exp_se3",
    "adjoint",
    "adjoint_inv",
    "adjoint_inv_transpose",
    "adjoint_batch",
    "adjoint_inv_batch",
    "ad",
    "ad_dual",
    "ad_apply",
    "coad_apply",
    "transform_twist",
    "left_perturb",
]
