"""Loguru sink configuration for CLI runs."""

import sys
from pathlib import Path

from loguru import logger

_FILE_FORMAT = '{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function} | {message} | {extra}'


class RunFileSink:
    """Custom sink that appends formatted loguru records to a run directory log file."""

    def __init__(self, path: Path) -> None:
        """Open (create) the log file.

        Args:
            path: Location of the log file; parent directories are created.
        """
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path

    def write(self, message: str) -> None:
        """Append one formatted record."""
        with self.path.open('a', encoding='utf-8') as handle:
            handle.write(message)


def configure_logging(*, quiet: bool = False, log_file: Path | None = None) -> None:
    """Replace loguru's default handler with the CLI sinks.

    Args:
        quiet: Only warnings and errors reach stderr when set.
        log_file: Optional path that receives every record at DEBUG level.
    """
    logger.remove()
    logger.add(sys.stderr, level='WARNING' if quiet else 'INFO')
    if log_file is not None:
        logger.add(RunFileSink(log_file), level='DEBUG', format=_FILE_FORMAT)
