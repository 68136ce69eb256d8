"""
galint：运动学树上高阶 Galerkin 变分积分器的递推求值、Newton 求解与线性化。

包含：
- 空间代数 (`se3.py`)、机构模型 (`model.py`)、离散格式 (`galerkin.py`)
- DEL 求值与外力/约束 (`del_equations.py`, `forces.py`, `constraints.py`)
- 递推 Newton 与时间步 (`newton.py`)、解析线性化 (`linearize.py`)
- 稠密差分参考实现 (`oracle.py`)、命令行 (`cli.py`, `commands/`)
"""

from .constraints import ConstraintSet, JointLock, PointOnSphere
from .del_equations import DiscreteState, evaluate_del, initial_state
from .errors import (
    DimensionMismatch,
    GalintError,
    ModelValidationError,
    NoConvergence,
    NonFiniteState,
    RankDeficientConstraints,
    SingularJacobian,
    UnsupportedOrder,
)
from .forces import ForceSum, JointDamping, JointTorques, QuadraticDrag, ZeroForce
from .galerkin import GalerkinScheme, lobatto, parse_scheme, simpson, trapezoidal
from .linearize import d2_discrete_lagrangian, energy_hessians, linearize_del, mechanical_energy
from .model import MechanismModel, chain_model, load_model, random_tree, validate
from .newton import (
    SolverConfig,
    StepWorkspace,
    constrained_step_second_order,
    newton_direction,
    rollout,
    step,
)

__all__ = [
    # 模型与格式
    "MechanismModel",
    "chain_model",
    "random_tree",
    "load_model",
    "validate",
    "GalerkinScheme",
    "trapezoidal",
    "simpson",
    "lobatto",
    "parse_scheme",
    # DEL 与求解
    "DiscreteState",
    "initial_state",
    "evaluate_del",
    "newton_direction",
    "step",
    "rollout",
    "constrained_step_second_order",
    "SolverConfig",
    "StepWorkspace",
    # 线性化
    "energy_hessians",
    "d2_discrete_lagrangian",
    "linearize_del",
    "mechanical_energy",
    # 力与约束
    "ZeroForce",
    "JointDamping",
    "JointTorques",
    "QuadraticDrag",
    "ForceSum",
    "JointLock",
    "PointOnSphere",
    "ConstraintSet",
    # 错误
    "GalintError",
    "ModelValidationError",
    "DimensionMismatch",
    "UnsupportedOrder",
    "SingularJacobian",
    "NoConvergence",
    "RankDeficientConstraints",
    "NonFiniteState",
]
