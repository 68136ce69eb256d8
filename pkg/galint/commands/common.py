"""
命令的公共部分：统一的 JSON 结果格式、模型构建、初值采样与 CSV 写出。
"""

import csv
import json
import logging
import os
import sys
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..del_equations import DiscreteState, initial_state
from ..galerkin import GalerkinScheme, parse_scheme
from ..model import MechanismModel, chain_model, load_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """参数或文件 I/O 问题，对应退出码 2。"""


def make_command_result(
    command: str,
    success: bool,
    data: Optional[Any] = None,
    message: Optional[str] = None,
    error: Optional[str] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> str:
    """
    统一的 JSON 返回格式：
    {
      "command": "<command_name>",
      "success": true/false,
      "message": "<可选的描述>",
      "data": { ... },
      "error": "<仅在 success=false 时出现>"
    }
    """
    payload: Dict[str, Any] = {"command": command, "success": success}
    if message:
        payload["message"] = message
    if data is not None:
        payload["data"] = data
    if error:
        payload["error"] = error
    if extra:
        payload.update(extra)
    return json.dumps(payload, ensure_ascii=False)


def parse_float_list(raw: str) -> List[float]:
    try:
        values = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"invalid number list {raw!r}: {e}")
    if not values:
        raise UsageError(f"empty number list {raw!r}")
    return values


def parse_int_list(raw: str) -> List[int]:
    try:
        values = [int(x) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise UsageError(f"invalid integer list {raw!r}: {e}")
    if not values or min(values) < 1:
        raise UsageError(f"integer list {raw!r} must be non-empty and positive")
    return values


def parse_name_list(raw: str) -> List[str]:
    names = [x.strip() for x in raw.split(",") if x.strip()]
    if not names:
        raise UsageError(f"empty name list {raw!r}")
    return names


def build_model(model_path: Optional[str], chain: Optional[int], link_mass: float = 1.0,
                link_length: float = 1.0) -> MechanismModel:
    """--model 与 --chain 二选一；文件缺失或 JSON 损坏视为用法错误。"""
    if model_path:
        if not os.path.exists(model_path):
            raise UsageError(f"model file not found: {model_path}")
        try:
            return load_model(model_path)
        except (OSError, ValueError, KeyError, TypeError) as e:
            raise UsageError(f"cannot read model {model_path}: {e}")
    n = chain if chain is not None else 2
    if n < 1:
        raise UsageError(f"--chain must be >= 1, got {n}")
    return chain_model(n, link_mass=link_mass, link_length=link_length)


def build_scheme(name: str) -> GalerkinScheme:
    try:
        return parse_scheme(name)
    except ValueError as e:
        raise UsageError(str(e))


def sample_initial_state(model: MechanismModel, rng: np.random.Generator,
                         q_range: float = np.pi / 2, qdot_range: float = np.pi / 2) -> DiscreteState:
    """q⁰、q̇⁰ 在 [−range, range] 上均匀采样；range 为 0 时取零。"""
    q = rng.uniform(-q_range, q_range, size=model.n) if q_range > 0 else np.zeros(model.n)
    qdot = rng.uniform(-qdot_range, qdot_range, size=model.n) if qdot_range > 0 else np.zeros(model.n)
    return initial_state(model, q, qdot)


def check_time_grid(dt: float, horizon: Optional[float] = None) -> int:
    """校验 Δt > 0、T ≥ Δt，返回步数 round(T/Δt)。"""
    if not dt > 0.0:
        raise UsageError(f"--dt must be positive, got {dt}")
    if horizon is None:
        return 0
    if horizon < dt:
        raise UsageError(f"--horizon ({horizon}) must be >= --dt ({dt})")
    return int(round(horizon / dt))


def write_csv(path: Optional[str], header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """写出 CSV；path 为 None 或 "-" 时写到标准输出。"""
    rows = list(rows)
    if path in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise UsageError(f"cannot write {path}: {e}")
    logger.info(f"[CLI] Wrote {len(rows)} row(s) to {path}")


def format_float(x: float) -> str:
    return repr(float(x))


__all__ = [
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_USAGE",
    "UsageError",
    "make_command_result",
    "parse_float_list",
    "parse_int_list",
    "parse_name_list",
    "build_model",
    "build_scheme",
    "sample_initial_state",
    "check_time_grid",
    "write_csv",
    "format_float",
]
