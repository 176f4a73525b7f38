"""
Relationship detection pipeline - command-line entry point
Subcommands: synth, build-freq, train-rel, train-attr, infer, eval
"""
import sys
from typing import List, Optional

from loguru import logger

from commands import build_registry
from config import settings


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code"""
    registry = build_registry()
    parser = registry.build_parser()
    args = parser.parse_args(argv)

    configure_logging(args.log_level or settings.log_level)

    result = registry.execute(args)
    if not result.success:
        logger.error(f"{args.command}: {result.error}")
        return 1
    logger.info(f"{args.command} wrote {result.artifact}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
