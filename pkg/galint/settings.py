"""
运行配置：.env / 环境变量 与 config/solver.json。

- GALINT_THREADS: 基准命令线程池上限
- GALINT_LOG_LEVEL: CLI 日志级别
- GALINT_NEWTON_TOL / GALINT_NEWTON_MAX_ITER: 覆盖求解器默认值
"""

import json
import logging
import os
from typing import Any, Dict

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s'
LOG_DATEFMT = '%Y-%m-%d %H:%M:%S'

SOLVER_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config", "solver.json")

BUILTIN_SOLVER_DEFAULTS: Dict[str, float] = {
    "tol": 1e-10,
    "max_iter": 50,
    "backtrack": 0.5,
    "min_step": 2.0 ** -20,
}


def setup_logging(level: str = None) -> None:
    """为 CLI 入口配置根日志（库模块只用 getLogger）。"""
    level_name = (level or os.getenv("GALINT_LOG_LEVEL", "INFO")).upper()
    numeric = getattr(logging, level_name, None)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    logging.basicConfig(level=numeric, format=LOG_FORMAT, datefmt=LOG_DATEFMT)


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"[CONFIG] {name}={raw!r} is not an integer, using {default}")
        return default
    if value < minimum:
        logger.warning(f"[CONFIG] {name}={value} below {minimum}, using {default}")
        return default
    return value


def _env_positive_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = float(raw)
    except ValueError:
        logger.warning(f"[CONFIG] {name}={raw!r} is not a number, using {default}")
        return default
    if not value > 0.0:
        logger.warning(f"[CONFIG] {name}={value} must be positive, using {default}")
        return default
    return value


def thread_count() -> int:
    """GALINT_THREADS，默认 1。"""
    return _env_int("GALINT_THREADS", 1)


def load_solver_defaults(path: str = None) -> Dict[str, Any]:
    """
    读取求解器默认参数。

    优先级：环境变量 > config/solver.json > 内置默认值。
    文件缺失或损坏时记录警告并回退。
    """
    config_path = path or SOLVER_CONFIG_PATH
    values: Dict[str, Any] = dict(BUILTIN_SOLVER_DEFAULTS)
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError("solver config must be a JSON object")
        for key in BUILTIN_SOLVER_DEFAULTS:
            if key in data:
                values[key] = data[key]
        logger.debug(f"[CONFIG] Loaded solver defaults from {config_path}")
    except Exception as e:
        logger.warning(f"[CONFIG] Failed to load solver defaults: {e}; using built-in defaults")

    values["tol"] = _env_positive_float("GALINT_NEWTON_TOL", float(values["tol"]))
    values["max_iter"] = _env_int("GALINT_NEWTON_MAX_ITER", int(values["max_iter"]))
    return values


__all__ = [
    "LOG_FORMAT",
    "LOG_DATEFMT",
    "SOLVER_CONFIG_PATH",
    "BUILTIN_SOLVER_DEFAULTS",
    "setup_logging",
    "thread_count",
    "load_solver_defaults",
]
