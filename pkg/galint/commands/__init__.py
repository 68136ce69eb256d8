"""
galint 命令集合

每个命令模块提供 add_parser(subparsers) 与 run(args) -> (退出码, JSON 摘要)。
"""

from . import check, convergence, robustness, scaling, simulate
from .common import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, UsageError, make_command_result

__all__ = [
    # 命令模块
    "simulate",
    "scaling",
    "convergence",
    "robustness",
    "check",
    # 公共部分
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_USAGE",
    "UsageError",
    "make_command_result",
]
