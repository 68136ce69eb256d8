"""
机构模型（运动学树）与前向运动学。

- 刚体按构造顺序编号 0..n-1，父节点编号必须小于子节点，根坐标系记为 ROOT (-1)
- 每个关节为单自由度：转动 (‖s‖=1) 或移动 (s=0, ‖n‖=1)
- 坐标系 {i} 的原点位于刚体质心，M_i = diag(𝓘_i, m_i I)

KinematicsCache 以 (body, node) 为主序连续存放每个控制点的空间量。
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, ModelValidationError
from .se3 import (
    SpatialTransform,
    ad_apply,
    adjoint_inv_batch,
    exp_twist_batch,
    hat,
    transform_twist,
)

logger = logging.getLogger(__name__)

ROOT = -1
JOINT_KINDS = ("revolute", "prismatic")
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)
CHAIN_GRAVITY = (0.0, -9.81, 0.0)

UNIT_SCREW_TOL = 1e-9
INERTIA_SYM_TOL = 1e-12
INERTIA_EIG_TOL = -1e-12
ROTATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Joint:
    """单自由度关节：子刚体坐标系下的 twist S_i = (s_i; n_i)。"""

    twist: NDArray
    parent: int = ROOT
    rest_transform: SpatialTransform = field(default_factory=SpatialTransform.identity)
    kind: str = "revolute"

    def __post_init__(self):
        S = np.array(self.twist, dtype=float).reshape(6)
        S.setflags(write=False)
        object.__setattr__(self, "twist", S)
        object.__setattr__(self, "parent", int(self.parent))

    @classmethod
    def revolute(cls, axis: Sequence[float], parent: int = ROOT,
                 rest_transform: Optional[SpatialTransform] = None,
                 point: Sequence[float] = (0.0, 0.0, 0.0)) -> "Joint":
        """绕过 point（刚体坐标系）的 axis 轴转动：S = (s, point × s)。"""
        s = np.asarray(axis, dtype=float)
        n = np.cross(np.asarray(point, dtype=float), s)
        return cls(np.concatenate([s, n]), parent,
                   rest_transform or SpatialTransform.identity(), "revolute")

    @classmethod
    def prismatic(cls, axis: Sequence[float], parent: int = ROOT,
                  rest_transform: Optional[SpatialTransform] = None) -> "Joint":
        return cls(np.concatenate([np.zeros(3), np.asarray(axis, dtype=float)]), parent,
                   rest_transform or SpatialTransform.identity(), "prismatic")


@dataclass(frozen=True, eq=False)
class Body:
    """刚体：质量、质心处转动惯量与连接父节点的关节。"""

    mass: float
    inertia: NDArray
    joint: Joint
    name: str = ""

    def __post_init__(self):
        I = np.array(self.inertia, dtype=float)
        I.setflags(write=False)
        object.__setattr__(self, "inertia", I)
        object.__setattr__(self, "mass", float(self.mass))

    @property
    def spatial_inertia(self) -> NDArray:
        """M_i = diag(𝓘_i, m_i I)。"""
        M = np.zeros((6, 6))
        M[:3, :3] = self.inertia
        M[3:, 3:] = self.mass * np.eye(3)
        return M


@dataclass(frozen=True)
class ModelViolation:
    body: Optional[int]
    rule: str
    message: str

    def __str__(self) -> str:
        where = "model" if self.body is None else f"body {self.body}"
        return f"[{self.rule}] {where}: {self.message}"


class MechanismModel:
    """不可变的运动学树。构造时不做校验，使用 validate() / require_valid()。"""

    def __init__(self, bodies: Sequence[Body], gravity: Sequence[float] = DEFAULT_GRAVITY):
        self._bodies: Tuple[Body, ...] = tuple(bodies)
        g = np.array(gravity, dtype=float).reshape(3)
        g.setflags(write=False)
        self._gravity = g
        n = len(self._bodies)
        self._parents = np.array([b.joint.parent for b in self._bodies], dtype=int)
        self._parents.setflags(write=False)
        children: List[List[int]] = [[] for _ in range(n)]
        for i, par in enumerate(self._parents):
            if 0 <= par < n and par != i:
                children[par].append(i)
        self._children = tuple(tuple(c) for c in children)
        self._ancestors = tuple(self._walk_ancestors(i) for i in range(n))
        self._masses = np.array([b.mass for b in self._bodies])
        self._inertias = np.array([b.spatial_inertia for b in self._bodies]).reshape(n, 6, 6)
        self._twists = np.array([b.joint.twist for b in self._bodies]).reshape(n, 6)

    def _walk_ancestors(self, i: int) -> Tuple[int, ...]:
        chain: List[int] = []
        par = self._parents[i]
        seen = 0
        while 0 <= par < len(self._bodies) and seen <= len(self._bodies):
            chain.append(int(par))
            par = self._parents[par]
            seen += 1
        return tuple(reversed(chain))

    @property
    def bodies(self) -> Tuple[Body, ...]:
        return self._bodies

    @property
    def gravity(self) -> NDArray:
        return self._gravity

    @property
    def n(self) -> int:
        return len(self._bodies)

    @property
    def parents(self) -> NDArray:
        return self._parents

    @property
    def masses(self) -> NDArray:
        return self._masses

    @property
    def spatial_inertias(self) -> NDArray:
        return self._inertias

    @property
    def twists(self) -> NDArray:
        return self._twists

    def parent(self, i: int) -> int:
        return int(self._parents[i])

    def children(self, i: int) -> Tuple[int, ...]:
        return self._children[i]

    def ancestors(self, i: int) -> Tuple[int, ...]:
        """anc(i)，从根到 par(i) 排列，不含 i。"""
        return self._ancestors[i]

    def supports(self, i: int) -> Tuple[int, ...]:
        """anc(i) ∪ {i}。"""
        return self._ancestors[i] + (i,)

    def is_ancestor_or_self(self, j: int, i: int) -> bool:
        return j == i or j in self._ancestors[i]

    def with_gravity(self, gravity: Sequence[float]) -> "MechanismModel":
        return MechanismModel(self._bodies, gravity)

    def require_valid(self) -> "MechanismModel":
        violations = validate(self)
        if violations:
            raise ModelValidationError(violations)
        return self

    def __repr__(self) -> str:
        return f"MechanismModel(n={self.n}, gravity={self._gravity.tolist()})"


def validate(model: MechanismModel) -> List[ModelViolation]:
    """检查所有类型不变量，返回全部违规项（带刚体编号），从不抛异常。"""
    violations: List[ModelViolation] = []
    if not np.all(np.isfinite(model.gravity)):
        violations.append(ModelViolation(None, "gravity", "gravity vector is not finite"))
    for i, body in enumerate(model.bodies):
        joint = body.joint
        par = joint.parent
        if not (par == ROOT or 0 <= par < i):
            violations.append(ModelViolation(
                i, "topology", f"parent {par} must be ROOT ({ROOT}) or an index smaller than {i}"))
        if joint.kind not in JOINT_KINDS:
            violations.append(ModelViolation(i, "joint_kind", f"unknown joint kind {joint.kind!r}"))
        S = joint.twist
        if not np.all(np.isfinite(S)):
            violations.append(ModelViolation(i, "unit_screw", "joint twist is not finite"))
        else:
            s_norm = float(np.linalg.norm(S[:3]))
            n_norm = float(np.linalg.norm(S[3:]))
            if joint.kind == "revolute" and abs(s_norm - 1.0) > UNIT_SCREW_TOL:
                violations.append(ModelViolation(i, "unit_screw", f"revolute axis norm {s_norm:.6g} != 1"))
            if joint.kind == "prismatic" and (s_norm > UNIT_SCREW_TOL or abs(n_norm - 1.0) > UNIT_SCREW_TOL):
                violations.append(ModelViolation(
                    i, "unit_screw", f"prismatic twist needs s=0 and |n|=1 (|s|={s_norm:.6g}, |n|={n_norm:.6g})"))
        if not np.isfinite(body.mass) or body.mass < 0.0:
            violations.append(ModelViolation(i, "mass", f"mass {body.mass} must be finite and >= 0"))
        I = body.inertia
        if I.shape != (3, 3) or not np.all(np.isfinite(I)):
            violations.append(ModelViolation(i, "inertia", f"inertia must be a finite 3x3 matrix, got shape {I.shape}"))
        else:
            asym = float(np.abs(I - I.T).max())
            if asym > INERTIA_SYM_TOL:
                violations.append(ModelViolation(i, "inertia", f"inertia not symmetric (|I - I^T| = {asym:.3e})"))
            else:
                eig_min = float(np.linalg.eigvalsh(I).min())
                if eig_min < INERTIA_EIG_TOL:
                    violations.append(ModelViolation(i, "inertia", f"inertia not PSD (min eigenvalue {eig_min:.3e})"))
        if not joint.rest_transform.is_valid(ROTATION_TOL):
            err = joint.rest_transform.orthonormality_error()
            violations.append(ModelViolation(i, "rest_transform", f"rest rotation not orthonormal (error {err:.3e})"))
    return violations


@dataclass
class KinematicsCache:
    """
    前向运动学结果，所有数组以 (body, node) 为前两维。

    q, qdot: (n, N)；R: (n, N, 3, 3)；p: (n, N, 3)；
    Sbar, vbar, Sdot: (n, N, 6)；Mbar: (n, N, 6, 6)
    """

    q: NDArray
    qdot: NDArray
    R: NDArray
    p: NDArray
    Sbar: NDArray
    Mbar: NDArray
    vbar: NDArray
    Sdot: NDArray
    visits: NDArray

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.q.shape[1]

    def transform(self, i: int, alpha: int) -> SpatialTransform:
        return SpatialTransform(self.R[i, alpha], self.p[i, alpha])


def kinematics(model: MechanismModel, q_nodes: NDArray, qdot_nodes: NDArray) -> KinematicsCache:
    """
    给定每个节点的 (q, q̇)，沿树前向计算 g_i、S̄_i、M̄_i、v̄_i、Ṡ̄_i。

    Args:
        q_nodes, qdot_nodes: 形状 (N, n)
    """
    q_nodes = np.atleast_2d(np.asarray(q_nodes, dtype=float))
    qdot_nodes = np.atleast_2d(np.asarray(qdot_nodes, dtype=float))
    n = model.n
    if q_nodes.shape[1] != n or qdot_nodes.shape != q_nodes.shape:
        raise DimensionMismatch("control points", (q_nodes.shape[0], n), q_nodes.shape)
    N = q_nodes.shape[0]
    R = np.empty((n, N, 3, 3))
    p = np.empty((n, N, 3))
    Sbar = np.empty((n, N, 6))
    Mbar = np.empty((n, N, 6, 6))
    vbar = np.empty((n, N, 6))
    visits = np.zeros((n, N), dtype=int)
    for i, body in enumerate(model.bodies):
        joint = body.joint
        Rj, pj = exp_twist_batch(joint.twist, q_nodes[:, i])
        R0, p0 = joint.rest_transform.R, joint.rest_transform.p
        R_local = R0 @ Rj
        p_local = p0 + np.einsum("ij,nj->ni", R0, pj)
        par = joint.parent
        if par == ROOT:
            R[i] = R_local
            p[i] = p_local
            v_par = np.zeros((N, 6))
        else:
            R[i] = R[par] @ R_local
            p[i] = p[par] + np.einsum("nij,nj->ni", R[par], p_local)
            v_par = vbar[par]
        Sbar[i] = transform_twist(R[i], p[i], joint.twist)
        Ainv = adjoint_inv_batch(R[i], p[i])
        Mbar[i] = np.swapaxes(Ainv, -1, -2) @ model.spatial_inertias[i] @ Ainv
        vbar[i] = v_par + Sbar[i] * qdot_nodes[:, i, None]
        visits[i] += 1
    Sdot = ad_apply(vbar, Sbar)
    return KinematicsCache(
        q=q_nodes.T.copy(), qdot=qdot_nodes.T.copy(), R=R, p=p, Sbar=Sbar,
        Mbar=Mbar, vbar=vbar, Sdot=Sdot, visits=visits,
    )


def forward_pass(model: MechanismModel, scheme, qbar: NDArray, dt: float) -> KinematicsCache:
    """控制点 q̄ᵏ ((s+1)×n) -> 各节点运动学量，q̇ 由微分矩阵重构。"""
    qbar = np.asarray(qbar, dtype=float)
    if qbar.shape != (scheme.num_nodes, model.n):
        raise DimensionMismatch("control points", (scheme.num_nodes, model.n), qbar.shape)
    return kinematics(model, qbar, scheme.velocities(qbar, dt))


def kinetic_energy(cache: KinematicsCache, alpha: int = 0) -> float:
    """K = ½ Σ v̄ᵢᵀ M̄ᵢ v̄ᵢ。"""
    v = cache.vbar[:, alpha]
    return 0.5 * float(np.einsum("ni,nij,nj->", v, cache.Mbar[:, alpha], v))


def potential_energy(model: MechanismModel, cache: KinematicsCache, alpha: int = 0) -> float:
    """V_g = −Σ m_i g⃗ᵀ p_i。"""
    return -float(np.sum(model.masses * (cache.p[:, alpha] @ model.gravity)))


def lagrangian(model: MechanismModel, cache: KinematicsCache, alpha: int = 0) -> float:
    return kinetic_energy(cache, alpha) - potential_energy(model, cache, alpha)


def gravity_wrench(model: MechanismModel, cache: KinematicsCache) -> NDArray:
    """重力的空间 wrench F̄ = (p × m g⃗, m g⃗)，形状 (n, N, 6)。"""
    f = model.masses[:, None, None] * model.gravity[None, None, :]
    f = np.broadcast_to(f, cache.p.shape)
    return np.concatenate([np.cross(cache.p, f), f], axis=-1)


def gravity_wrench_jacobian(model: MechanismModel, cache: KinematicsCache) -> NDArray:
    """重力 wrench 对空间左扰动 η̄ 的导数 [[m ĝ p̂, −m ĝ], [0, 0]]，形状 (n, N, 6, 6)。"""
    n, N = cache.n, cache.num_nodes
    g_hat = hat(model.gravity)
    m = model.masses[:, None, None, None]
    out = np.zeros((n, N, 6, 6))
    out[..., :3, :3] = m * (g_hat @ hat(cache.p))
    out[..., :3, 3:] = -m * g_hat
    return out


# ---------------------------------------------------------------------------
# 模型生成与文件读写
# ---------------------------------------------------------------------------

def chain_model(n: int, link_mass: float = 1.0, link_length: float = 1.0,
                gravity: Sequence[float] = CHAIN_GRAVITY) -> MechanismModel:
    """
    n 连杆摆：z 轴转动关节，rest transform 沿 −y 平移 link_length。

    质量集中在杆端（刚体原点），转动惯量取细杆形式 diag(ml²/12, 0, ml²/12)。
    """
    if n < 1:
        raise ValueError(f"chain needs at least one link, got {n}")
    l = float(link_length)
    rod = link_mass * l * l / 12.0
    inertia = np.diag([rod, 0.0, rod])
    rest = SpatialTransform(np.eye(3), np.array([0.0, -l, 0.0]))
    bodies = []
    for i in range(n):
        joint = Joint.revolute((0.0, 0.0, 1.0), parent=i - 1 if i > 0 else ROOT,
                               rest_transform=rest, point=(0.0, l, 0.0))
        bodies.append(Body(link_mass, inertia, joint, name=f"link{i + 1}"))
    return MechanismModel(bodies, gravity)


def _random_unit(rng: np.random.Generator) -> NDArray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_tree(rng: np.random.Generator, n: int, prismatic_fraction: float = 0.25,
                gravity: Sequence[float] = DEFAULT_GRAVITY) -> MechanismModel:
    """随机运动学树（混合转动/移动关节、随机 rest transform、正定惯量），用于测试与 check。"""
    bodies = []
    for i in range(n):
        parent = ROOT if i == 0 else int(rng.integers(-1, i))
        axis_angle = rng.uniform(-np.pi, np.pi) * _random_unit(rng)
        R0, _ = exp_twist_batch(np.concatenate([axis_angle, np.zeros(3)]), np.array([1.0]))
        rest = SpatialTransform(R0[0], rng.uniform(-0.5, 0.5, size=3))
        if rng.uniform() < prismatic_fraction:
            joint = Joint.prismatic(_random_unit(rng), parent, rest)
        else:
            joint = Joint.revolute(_random_unit(rng), parent, rest, point=rng.uniform(-0.4, 0.4, size=3))
        A = rng.normal(size=(3, 3))
        inertia = 0.05 * (A @ A.T) + 0.05 * np.eye(3)
        bodies.append(Body(rng.uniform(0.5, 2.0), inertia, joint, name=f"body{i + 1}"))
    return MechanismModel(bodies, gravity)


def model_from_dict(data: Dict[str, Any]) -> MechanismModel:
    """
    由 JSON 结构构造模型（不校验，调用方决定是否 require_valid）。

    Raises:
        ValueError: 字段缺失、父节点名未知或在子节点之后定义
        ModelValidationError: 刚体名重复
    """
    if not isinstance(data, dict) or "bodies" not in data:
        raise ValueError("model document must be an object with a 'bodies' list")
    gravity = data.get("gravity", list(DEFAULT_GRAVITY))
    index: Dict[str, int] = {}
    bodies: List[Body] = []
    for i, entry in enumerate(data["bodies"]):
        try:
            name = str(entry.get("name", f"body{i + 1}"))
            parent_name = entry.get("parent", "world")
            if parent_name in ("world", None):
                parent = ROOT
            elif parent_name in index:
                parent = index[parent_name]
            else:
                raise ValueError(f"body {name!r}: unknown parent {parent_name!r} (parents must be listed first)")
            jd = entry["joint"]
            kind = jd.get("type", "revolute")
            axis = np.asarray(jd["axis"], dtype=float)
            rt = entry.get("rest_transform", {}) or {}
            rest = SpatialTransform(np.asarray(rt.get("rotation", np.eye(3)), dtype=float),
                                    np.asarray(rt.get("translation", [0.0, 0.0, 0.0]), dtype=float))
            if kind == "prismatic":
                joint = Joint(np.concatenate([np.zeros(3), axis]), parent, rest, kind)
            else:
                point = np.asarray(jd.get("point", [0.0, 0.0, 0.0]), dtype=float)
                joint = Joint(np.concatenate([axis, np.cross(point, axis)]), parent, rest, kind)
            bodies.append(Body(float(entry["mass"]), np.asarray(entry["inertia"], dtype=float), joint, name))
        except KeyError as e:
            raise ValueError(f"body #{i}: missing field {e}") from None
        if name in index:
            raise ModelValidationError([ModelViolation(
                i, "topology", f"duplicate body name {name!r} (already used by body {index[name]})")])
        index[name] = i
    return MechanismModel(bodies, gravity)


def model_to_dict(model: MechanismModel) -> Dict[str, Any]:
    """模型 -> JSON 结构（与 model_from_dict 对应）。"""
    bodies = []
    for i, body in enumerate(model.bodies):
        joint = body.joint
        s, n = joint.twist[:3], joint.twist[3:]
        if joint.kind == "prismatic":
            jd = {"type": "prismatic", "axis": n.tolist()}
        else:
            # n = point × s，取与 s 垂直的点
            point = np.cross(s, n) / max(float(s @ s), 1e-300)
            jd = {"type": "revolute", "axis": s.tolist(), "point": point.tolist()}
        par = joint.parent
        bodies.append({
            "name": body.name or f"body{i + 1}",
            "parent": "world" if par == ROOT else (model.bodies[par].name or f"body{par + 1}"),
            "mass": body.mass,
            "inertia": body.inertia.tolist(),
            "joint": jd,
            "rest_transform": {
                "rotation": joint.rest_transform.R.tolist(),
                "translation": joint.rest_transform.p.tolist(),
            },
        })
    return {"gravity": model.gravity.tolist(), "bodies": bodies}


def load_model(path: str, validate_model: bool = True) -> MechanismModel:
    """
    读取 JSON 机构描述文件。

    Raises:
        OSError: 文件不存在或不可读
        ValueError: JSON 格式错误或字段缺失
        ModelValidationError: validate_model=True 且模型违反不变量
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"malformed model file {path}: {e}") from None
    model = model_from_dict(data)
    logger.info(f"[MODEL] Loaded {model.n}-body model from {path}")
    if validate_model:
        model.require_valid()
    return model


def save_model(model: MechanismModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(model), f, ensure_ascii=False, indent=2)


__all__ = [
    "ROOT",
    "JOINT_KINDS",
    "DEFAULT_GRAVITY",
    "CHAIN_GRAVITY",
    "Joint",
    "Body",
    "ModelViolation",
    "MechanismModel",
    "validate",
    "KinematicsCache",
    "kinematics",
    "forward_pass",
    "kinetic_energy",
    "potential_energy",
    "lagrangian",
    "gravity_wrench",
    "gravity_wrench_jacobian",
    "chain_model",
    "random_tree",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
]
