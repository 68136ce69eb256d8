"""
galint 命令行入口：simulate / scaling / convergence / robustness / check。

退出码：0 成功；1 求解失败或检查未通过；2 用法错误或文件 I/O 问题。
"""

import argparse
import logging
import sys
from typing import List, Optional

from .commands import check, convergence, robustness, scaling, simulate
from .commands.common import EXIT_FAILURE, EXIT_USAGE, UsageError, make_command_result
from .errors import GalintError
from .settings import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (simulate, scaling, convergence, robustness, check)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="galint", description="Galerkin variational integrators on kinematic trees")
    parser.add_argument("--log-level", default=None, help="overrides GALINT_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.add_parser(subparsers)
    return parser


def _emit(summary: str, csv_on_stdout: bool) -> None:
    # CSV 占用 stdout 时摘要改写到 stderr
    stream = sys.stderr if csv_on_stdout else sys.stdout
    print(summary, file=stream)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    setup_logging(args.log_level)
    csv_on_stdout = getattr(args, "out", None) in (None, "-") and args.command != "check"

    try:
        code, summary = args.handler(args)
    except UsageError as e:
        logger.error(f"[CLI] {e}")
        code, summary = EXIT_USAGE, make_command_result(args.command, False, error=str(e))
    except GalintError as e:
        logger.error(f"[CLI] {args.command} failed: {e}")
        code, summary = EXIT_FAILURE, make_command_result(args.command, False, error=str(e))
    except Exception as e:
        logger.error(f"[CLI] Unexpected error in {args.command}: {e}", exc_info=True)
        code, summary = EXIT_FAILURE, make_command_result(args.command, False, error=f"unexpected error: {e}")
    _emit(summary, csv_on_stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
