"""Exception hierarchy shared by every gcgail module.

The CLI maps these onto its exit codes, so raise the most specific class that applies.
"""

from collections.abc import Iterator
from contextlib import contextmanager


class GcgailError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GcgailError, ValueError):
    """Array or vector dimensions do not match what the operation expects."""


class NumericError(GcgailError, ArithmeticError):
    """A NaN or infinite value reached a computation that requires finite numbers."""


class ConfigError(GcgailError):
    """A configuration object or file is invalid."""


class DataValidationError(GcgailError, ValueError):
    """Input data violates a domain invariant (labels, ranges, ordering)."""


class NotFittedError(GcgailError):
    """A stateful transformer was used before being fitted."""


class InsufficientDataError(GcgailError):
    """Not enough observations to compute the requested quantity."""


class EpisodeTerminated(GcgailError):  # noqa: N818
    """Signals the end of a passenger panel: there is no next month to transition into."""


class TrainingDivergedError(GcgailError):
    """A loss or parameter became non-finite during training."""


class CompatibilityError(GcgailError):
    """A stored artifact does not match the requested model or conditioning."""


@contextmanager
def numeric_errors_as_divergence(stage: str, step: int) -> Iterator[None]:
    """Re-raise a `NumericError` from inside one training step as `TrainingDivergedError`."""
    try:
        yield
    except NumericError as exc:
        msg = f'{stage} diverged at step {step}: {exc}'
        raise TrainingDivergedError(msg) from exc
