"""JSON serialization helpers.

Every JSON and JSON Lines artifact the package writes goes through `dumps`, so numpy scalars and arrays,
paths, enums and pydantic models are encoded the same way everywhere. Floats use Python's shortest
round-trip repr, which makes write-then-read bit exact.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel


def default_serialization(obj: Any) -> Any:  # noqa: ANN401
    """Default serialization for objects the json module does not know.

    Converts numpy values to builtins, pydantic models to plain dicts, enums to their values
    and paths to strings.
    """
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode='json')
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    msg = f'Object of type {type(obj).__name__} is not JSON serializable'
    raise TypeError(msg)


def dumps(obj: Any, *, indent: int | None = None) -> str:  # noqa: ANN401
    """Serialize an object to a JSON string.

    Args:
        obj: The object to serialize
        indent: Optional pretty-print indentation

    Returns:
        JSON string representation of the object
    """
    return json.dumps(obj, default=default_serialization, indent=indent, allow_nan=False)


def dumpd(obj: Any) -> Any:  # noqa: ANN401
    """Convert an object to a JSON-serializable structure of builtins.

    Args:
        obj: The object to convert

    Returns:
        Dict/list representation of the object that can be JSON serialized
    """
    return json.loads(dumps(obj))
