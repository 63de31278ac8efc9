"""Test cases for the JSON serialization helpers."""  # noqa: INP001

import json
from pathlib import Path

import numpy as np
import pytest

from gcgail.mdp import ConditioningMode
from gcgail.panel.types import AdopterType, PassengerProfile
from gcgail.utils.typing import dumpd, dumps


def test_numpy_values_become_builtins() -> None:
    """Scalars and arrays serialize as plain numbers and lists."""
    payload = {'i': np.int64(3), 'f': np.float64(0.1), 'a': np.arange(3)}
    assert json.loads(dumps(payload)) == {'i': 3, 'f': 0.1, 'a': [0, 1, 2]}


def test_models_enums_paths_and_sets() -> None:
    """Pydantic models dump to dicts, enums to values, paths to strings and sets to sorted lists."""
    profile = PassengerProfile(passenger_id=1, home_station=0, work_station=4, latent_flex=0.1, latent_con=0.2,
                               latent_dis=0.3, archetype=frozenset({AdopterType.LATE, AdopterType.SUSTAINED}),
                               adoption_month=5)
    result = dumpd({'p': profile, 'mode': ConditioningMode.GROUP, 'path': Path('a/b'), 's': {3, 1}})
    assert result['p']['archetype'] == ['late', 'sustained']
    assert result['mode'] == 'group'
    assert result['path'] == str(Path('a/b'))
    assert result['s'] == [1, 3]


def test_floats_round_trip_exactly() -> None:
    """Shortest repr keeps every bit."""
    values = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(np.array(json.loads(dumps(values))), values)


def test_unsupported_and_non_finite_values_raise() -> None:
    """Unknown objects raise TypeError and NaN is refused."""
    with pytest.raises(TypeError):
        dumps(object())
    with pytest.raises(ValueError, match='Out of range'):
        dumps(float('nan'))
