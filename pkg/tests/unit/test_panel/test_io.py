"""Unit tests for panel artifact files."""  # noqa: INP001

from pathlib import Path

import pandas as pd
import pytest

from gcgail.errors import ConfigError, DataValidationError
from gcgail.panel.io import (
    load_generator_config,
    read_profiles,
    read_trajectories,
    read_trips,
    write_profiles,
    write_trajectories,
    write_trips,
)


def test_panel_files_survive_a_write_read_cycle(tmp_path: Path, small_population, small_trajectories) -> None:  # noqa: ANN001
    """Trips, profiles and trajectories read back equal to what was written."""
    trips, profiles = small_population
    pd.testing.assert_frame_equal(read_trips(write_trips(trips, tmp_path / 'trips.csv')), trips,
                                  check_dtype=False)
    assert read_profiles(write_profiles(profiles, tmp_path / 'profiles.jsonl')) == profiles
    restored = read_trajectories(write_trajectories(small_trajectories, tmp_path / 'trajectories.jsonl'))
    assert restored == small_trajectories


def test_bad_trajectory_line_reports_its_position(tmp_path: Path, make_trajectory) -> None:  # noqa: ANN001
    """A corrupt record names the file and line."""
    path = write_trajectories([make_trajectory(0, [0, 1])], tmp_path / 'trajectories.jsonl')
    path.write_text(path.read_text() + '{"pid": 1, "cond": {}}\n')
    with pytest.raises(DataValidationError, match=':2:'):
        read_trajectories(path)


def test_trip_file_needs_every_column(tmp_path: Path) -> None:
    """Missing columns are rejected."""
    path = tmp_path / 'trips.csv'
    path.write_text('pid,date,tin\n0,2014-07-01,470.0\n')
    with pytest.raises(DataValidationError):
        read_trips(path)


def test_generator_config_from_toml(tmp_path: Path) -> None:
    """Keys are read from a [generator] table or the top level."""
    nested = tmp_path / 'nested.toml'
    nested.write_text('[generator]\nn_passengers = 50\nbeta_0 = -0.5\n')
    flat = tmp_path / 'flat.toml'
    flat.write_text('n_passengers = 7\n')
    assert load_generator_config(nested).n_passengers == 50  # noqa: PLR2004
    assert load_generator_config(nested).beta_0 == -0.5  # noqa: PLR2004
    assert load_generator_config(flat).n_passengers == 7  # noqa: PLR2004


@pytest.mark.parametrize('content', ['n_passengers = [', 'unknown_key = 1\n', 'n_passengers = 0\n',
                                     '[generator.band_mixture]\nearly_morning = 0.9\nmorning_peak = 0.9\n'])
def test_invalid_generator_config_is_a_config_error(tmp_path: Path, content: str) -> None:
    """Malformed, unknown or out-of-range settings."""
    path = tmp_path / 'generator.toml'
    path.write_text(content)
    with pytest.raises(ConfigError):
        load_generator_config(path)


def test_missing_generator_config(tmp_path: Path) -> None:
    """A missing file is a config error."""
    with pytest.raises(ConfigError):
        load_generator_config(tmp_path / 'absent.toml')
