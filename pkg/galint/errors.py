"""
galint 的异常类型。

所有异常都继承自 GalintError，诊断信息以属性形式保存，便于命令层转换成退出码和 JSON 结果。
"""

from typing import Any, List, Optional, Sequence


class GalintError(Exception):
    """galint 所有异常的基类。"""


class ModelValidationError(GalintError):
    """机构模型不满足类型不变量（父子顺序、单位螺旋、惯量等）。"""

    def __init__(self, violations: Sequence[Any]):
        self.violations: List[Any] = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model validation failed ({len(self.violations)} violation(s)): {lines}")


class DimensionMismatch(GalintError, ValueError):
    """输入数组维度与模型/格式不一致。"""

    def __init__(self, what: str, expected: Any, actual: Any):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected shape {expected}, got {actual}")


class UnsupportedOrder(GalintError, ValueError):
    """不支持的 Galerkin 阶数 s。"""

    def __init__(self, s: Any, reason: str = "supported range is 1 <= s <= 12"):
        self.s = s
        super().__init__(f"unsupported order s={s}: {reason}")


class SingularJacobian(GalintError):
    """Newton 系统在某个刚体（或整体稠密矩阵）处奇异。"""

    def __init__(self, body: Optional[int], node: Optional[int], condition: float):
        self.body = body
        self.node = node
        self.condition = condition
        where = "dense system" if body is None else f"body {body}"
        if node is not None:
            where += f", node {node}"
        super().__init__(f"singular Newton system at {where} (condition estimate {condition:.3e})")


class NoConvergence(GalintError):
    """Newton 迭代在 max_iter 次内未收敛。"""

    def __init__(self, iterations: int, residual: float, history: Optional[Sequence[float]] = None):
        self.iterations = iterations
        self.residual = residual
        self.history = list(history or [])
        super().__init__(f"Newton did not converge after {iterations} iteration(s); residual {residual:.3e}")


class RankDeficientConstraints(GalintError):
    """约束 Schur 系统 (Dh J^-1 A) 奇异。"""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"constraint Schur complement is rank deficient (condition estimate {condition:.3e})")


class NonFiniteState(GalintError):
    """计算中出现 NaN/Inf。"""

    def __init__(self, what: str):
        self.what = what
        super().__init__(f"non-finite values in {what}")


__all__ = [
    "GalintError",
    "ModelValidationError",
    "DimensionMismatch",
    "UnsupportedOrder",
    "SingularJacobian",
    "NoConvergence",
    "RankDeficientConstraints",
    "NonFiniteState",
]
