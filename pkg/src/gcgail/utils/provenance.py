"""Provenance records written next to every output file."""

import hashlib
import subprocess
from pathlib import Path
from typing import Any

from loguru import logger

from gcgail import __version__
from gcgail.utils.typing import dumps

PROVENANCE_FILE = 'provenance.json'


def file_sha256(path: Path) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with path.open('rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def git_describe() -> str | None:
    """Return `git describe --always --dirty` for the working directory, or None outside a repository."""
    try:
        result = subprocess.run(['git', 'describe', '--always', '--dirty'],  # noqa: S607
                                capture_output=True, text=True, check=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return result.stdout.strip() or None


def write_provenance(directory: Path,
                     files: list[Path],
                     *,
                     config: Any,  # noqa: ANN401
                     seed: int | None,
                     extra: dict[str, Any] | None = None) -> Path:
    """Write `provenance.json` in `directory` describing the listed sibling files.

    The record holds the config echo, the seed, the package version, the git describe string
    when available and a SHA-256 content hash per file.

    Args:
        directory: Output directory; the provenance file is written here.
        files: Output files to hash.
        config: Configuration object or mapping echoed into the record.
        seed: Seed used to produce the files.
        extra: Additional fields to record.

    Returns:
        Path of the written provenance file.
    """
    record = {'package_version': __version__,
              'git_describe': git_describe(),
              'seed': seed,
              'config': config,
              'files': {path.name: file_sha256(path) for path in files}}
    if extra:
        record.update(extra)
    target = directory / PROVENANCE_FILE
    target.write_text(dumps(record, indent=2) + '\n', encoding='utf-8')
    logger.debug('Provenance written', path=str(target), n_files=len(files))
    return target
