"""
Command-line entry point for quarter-car parameter identification.

    python main.py gen    --roads 100 --masses 100 --train-roads 80 -o data/
    python main.py train  data/ --objective labelled -o runs/labelled
    python main.py eval   runs/labelled/checkpoint data/ --noise-sigma 0.01
    python main.py report runs/labelled/checkpoint runs/unlabelled/checkpoint data/
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from commands import evaluate, gen, report, train
from config import get_settings
from exceptions import QcmSysidError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout)
    ]
)
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcm-sysid",
        description="Road synthesis, quarter-car simulation and estimator training",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: QCM_SYSID_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include commands
    gen.register(subparsers)
    train.register(subparsers)
    evaluate.register(subparsers)
    report.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns 0 on success, 1 on a failed command, 2 on usage errors."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    if args.log_level and not isinstance(logging.getLevelName(args.log_level.upper()), int):
        parser.print_usage(sys.stderr)
        print(f"error: unknown log level '{args.log_level}'", file=sys.stderr)
        return 2

    try:
        logging.getLogger().setLevel((args.log_level or get_settings().log_level).upper())
        logger.info(f"Running '{args.command}'")
        args.handler(args, argv)
    except (QcmSysidError, ValidationError) as e:
        logger.error(f"Command '{args.command}' failed: {str(e)}", exc_info=True)
        return 1
    logger.info(f"Command '{args.command}' finished")
    return 0


if __name__ == "__main__":
    sys.exit(main())
