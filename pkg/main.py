import argparse
import logging
import sys
from typing import List, Optional

from config import configure_logging, settings
from commands import baselines, behaviour, harness, population
from exceptions import CoopMetaError

logger = logging.getLogger(__name__)

COMMAND_GROUPS = [population, behaviour, baselines, harness]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.PROJECT_NAME, description=settings.DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    parser.add_argument("--log-level", default="", help="Overrides LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for group in COMMAND_GROUPS:
        group.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Exit codes: 0 success, 2 configuration, usage or storage error, 3 numeric failure"""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        args.handler(args)
    except CoopMetaError as error:
        logger.error("Command failed: %s", error.to_dict())
        return error.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
