"""Reading and writing panel artifacts: trips CSV, trajectory and profile JSON Lines, generator config."""

import json
from collections.abc import Iterable
from pathlib import Path

import pandas as pd
import toml
from loguru import logger
from pydantic import ValidationError

from gcgail.errors import ConfigError, DataValidationError
from gcgail.mdp import ActionLabel, ConditionVector, StateVector
from gcgail.panel.generator import GeneratorConfig
from gcgail.panel.types import TRIP_COLUMNS, ExpertTrajectory, MonthlyObservation, PassengerProfile
from gcgail.utils.typing import dumps

TRIPS_FILE = 'trips.csv'
TRAJECTORIES_FILE = 'trajectories.jsonl'
PROFILES_FILE = 'profiles.jsonl'

_TRIP_DTYPES = {'pid': 'int64', 'date': 'str', 'tin': 'float64', 'tout': 'float64',
                'orig': 'int64', 'dest': 'int64', 'fare': 'float64', 'disc': 'int64'}


def load_generator_config(path: Path) -> GeneratorConfig:
    """Read a TOML generator config; keys may sit at top level or under ``[generator]``.

    Raises:
        ConfigError: Missing file, malformed TOML, unknown keys or invalid values.
    """
    if not path.is_file():
        msg = f'Generator config not found: {path}'
        raise ConfigError(msg)
    try:
        data = toml.load(path)
    except toml.TomlDecodeError as e:
        msg = f'Malformed TOML in {path}: {e}'
        raise ConfigError(msg) from e
    data = data.get('generator', data)
    try:
        return GeneratorConfig.model_validate(data)
    except ValidationError as e:
        msg = f'Invalid generator config {path}: {e}'
        raise ConfigError(msg) from e


def _trajectory_record(trajectory: ExpertTrajectory) -> dict:
    cond = trajectory.condition
    return {'pid': trajectory.passenger_id,
            'cond': {'flex': cond.flex_raw, 'con': cond.con_raw, 'dis': cond.dis_raw,
                     'g': [cond.g_flex, cond.g_con, cond.g_dis]},
            'obs': [{'m': obs.month_index, 's': obs.state.to_array(), 'a': int(obs.action)}
                    for obs in trajectory.observations]}


def _trajectory_from_record(record: dict) -> ExpertTrajectory:
    pid = int(record['pid'])
    cond = record['cond']
    g_flex, g_con, g_dis = cond['g']
    condition = ConditionVector(flex_raw=cond['flex'], con_raw=cond['con'], dis_raw=cond['dis'],
                                g_flex=g_flex, g_con=g_con, g_dis=g_dis)
    observations = tuple(MonthlyObservation(passenger_id=pid, month_index=int(obs['m']),
                                            state=StateVector.from_array(obs['s']),
                                            action=ActionLabel(int(obs['a'])))
                         for obs in record['obs'])
    return ExpertTrajectory(passenger_id=pid, observations=observations, condition=condition)


def write_trajectories(trajectories: Iterable[ExpertTrajectory], path: Path) -> Path:
    """One JSON object per passenger: ``{pid, cond: {flex, con, dis, g}, obs: [{m, s, a}]}``."""
    lines = [dumps(_trajectory_record(t)) for t in trajectories]
    path.write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')
    logger.debug('Trajectories written', path=str(path), passengers=len(lines))
    return path


def read_trajectories(path: Path) -> list[ExpertTrajectory]:
    """Inverse of `write_trajectories`.

    Raises:
        DataValidationError: A line is not valid JSON or violates a record invariant.
    """
    trajectories = []
    with path.open(encoding='utf-8') as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                trajectories.append(_trajectory_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                msg = f'{path}:{lineno}: invalid trajectory record: {e}'
                raise DataValidationError(msg) from e
    return trajectories


def write_profiles(profiles: Iterable[PassengerProfile], path: Path) -> Path:
    """Generator ground truth, one JSON object per passenger."""
    lines = [dumps(p) for p in profiles]
    path.write_text('\n'.join(lines) + ('\n' if lines else ''), encoding='utf-8')
    return path


def read_profiles(path: Path) -> list[PassengerProfile]:
    """Inverse of `write_profiles`."""
    with path.open(encoding='utf-8') as handle:
        return [PassengerProfile.model_validate_json(line) for line in handle if line.strip()]


def write_trips(trips: pd.DataFrame, path: Path) -> Path:
    """Trip table as CSV with the trip-file header."""
    trips.loc[:, list(TRIP_COLUMNS)].to_csv(path, index=False, lineterminator='\n')
    return path


def read_trips(path: Path) -> pd.DataFrame:
    """Read a trip CSV.

    Raises:
        DataValidationError: Missing columns.
    """
    trips = pd.read_csv(path, dtype=_TRIP_DTYPES)
    missing = set(TRIP_COLUMNS) - set(trips.columns)
    if missing:
        msg = f'{path} lacks trip columns {sorted(missing)}'
        raise DataValidationError(msg)
    return trips
