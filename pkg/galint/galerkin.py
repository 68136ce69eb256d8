"""
Galerkin 离散格式：控制点节点 cᵅ、Lobatto 求积权重 wᵅ、微分矩阵 bᵅᵝ 以及 aᵅᵝ = wᵝ bᵝᵅ。

格式在 [0,1] 上归一化；Δt 只在使用处出现（q̇ 的 1/Δt 因子和 wᵅΔt 求积因子）。
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import UnsupportedOrder

logger = logging.getLogger(__name__)

MAX_ORDER = 12
NODE_TOL = 1e-14
NODE_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class GalerkinScheme:
    """s 次 Galerkin 格式，精度阶 2s。"""

    s: int
    nodes: NDArray
    weights: NDArray
    diff_matrix: NDArray
    name: str = ""

    def __post_init__(self):
        for field in ("nodes", "weights", "diff_matrix"):
            arr = np.array(getattr(self, field), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        a = (self.weights[:, None] * self.diff_matrix).T.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)

    @property
    def num_nodes(self) -> int:
        return self.s + 1

    @property
    def order(self) -> int:
        return 2 * self.s

    def velocities(self, qbar: NDArray, dt: float) -> NDArray:
        """q̇^α = (1/Δt) Σ_β b^{αβ} q^β，qbar 形状 (s+1, n)。"""
        return self.diff_matrix @ np.asarray(qbar, dtype=float) / dt

    def node_times(self, t0: float, dt: float) -> NDArray:
        """t^{k,α} = t0 + cᵅΔt。"""
        return t0 + self.nodes * dt

    def interpolate(self, qbar: NDArray, tau: NDArray) -> NDArray:
        """在归一化时间 tau ∈ [0,1] 处对控制点做 Lagrange 插值。"""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        c = self.nodes
        basis = np.ones((tau.size, c.size))
        for j in range(c.size):
            for m in range(c.size):
                if m != j:
                    basis[:, j] *= (tau - c[m]) / (c[j] - c[m])
        return basis @ np.asarray(qbar, dtype=float)

    def __repr__(self) -> str:
        return f"GalerkinScheme(name={self.name!r}, s={self.s})"


def _barycentric_diff_matrix(c: NDArray) -> NDArray:
    """由重心 Lagrange 权重构造微分矩阵。"""
    m = c.size
    diff = c[:, None] - c[None, :]
    np.fill_diagonal(diff, 1.0)
    lam = 1.0 / np.prod(diff, axis=1)
    b = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                b[i, j] = (lam[j] / lam[i]) / (c[i] - c[j])
        b[i, i] = -np.sum(b[i, :])
    return b


def lobatto_nodes_weights(s: int):
    """
    [-1,1] 上 s+1 个 Gauss–Lobatto 节点与权重。

    以 Chebyshev–Gauss–Lobatto 点为初值，对 (1−x²)P_s′(x) 的根做 Newton 迭代。
    """
    n = s
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    P = np.zeros((n + 1, n + 1))
    for it in range(NODE_MAX_ITER):
        x_old = x
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, n + 1):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        x = x_old - (x * P[:, n] - P[:, n - 1]) / ((n + 1) * P[:, n])
        if np.max(np.abs(x - x_old)) < NODE_TOL:
            break
    else:
        logger.warning(f"[GALERKIN] Lobatto node iteration hit {NODE_MAX_ITER} iterations for s={s}")
    P[:, 0] = 1.0
    P[:, 1] = x
    for k in range(2, n + 1):
        P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
    w = 2.0 / ((n * (n + 1)) * (P[:, n] ** 2))
    return x, w


def _build(s: int, nodes: NDArray, weights: NDArray, name: str) -> GalerkinScheme:
    return GalerkinScheme(s=s, nodes=nodes, weights=weights,
                          diff_matrix=_barycentric_diff_matrix(nodes), name=name)


def trapezoidal() -> GalerkinScheme:
    """二阶梯形格式：s=1，节点 (0,1)，w=(½,½)，b=[[−1,1],[−1,1]]。"""
    return GalerkinScheme(
        s=1,
        nodes=np.array([0.0, 1.0]),
        weights=np.array([0.5, 0.5]),
        diff_matrix=np.array([[-1.0, 1.0], [-1.0, 1.0]]),
        name="trapezoidal",
    )


def simpson() -> GalerkinScheme:
    """四阶 Simpson 格式：s=2，节点 (0,½,1)，w=(1/6,4/6,1/6)。"""
    return GalerkinScheme(
        s=2,
        nodes=np.array([0.0, 0.5, 1.0]),
        weights=np.array([1.0, 4.0, 1.0]) / 6.0,
        diff_matrix=np.array([[-3.0, 4.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -4.0, 3.0]]),
        name="simpson",
    )


def lobatto(s: int) -> GalerkinScheme:
    """
    一般 s 的 Lobatto 格式（1 <= s <= 12）。

    Raises:
        UnsupportedOrder: s 超出范围
    """
    if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or not 1 <= s <= MAX_ORDER:
        raise UnsupportedOrder(s)
    s = int(s)
    x, w = lobatto_nodes_weights(s)
    c = 0.5 * (x + 1.0)
    c = 0.5 * (c + (1.0 - c[::-1]))
    c[0], c[-1] = 0.0, 1.0
    w = 0.25 * (w + w[::-1])
    return _build(s, c, w, f"lobatto:{s}")


def parse_scheme(name: str) -> GalerkinScheme:
    """'trapezoidal' | 'simpson' | 'lobatto:s' -> GalerkinScheme。"""
    key = name.strip().lower()
    if key == "trapezoidal":
        return trapezoidal()
    if key == "simpson":
        return simpson()
    if key.startswith("lobatto:"):
        try:
            s = int(key.split(":", 1)[1])
        except ValueError:
            raise UnsupportedOrder(key, "order must be an integer") from None
        return lobatto(s)
    raise ValueError(f"unknown scheme {name!r} (expected trapezoidal, simpson or lobatto:s)")


__all__ = [
    "MAX_ORDER",
    "GalerkinScheme",
    "lobatto_nodes_weights",
    "trapezoidal",
    "simpson",
    "lobatto",
    "parse_scheme",
]
