"""Unit tests for the command-line pipeline and its exit codes."""  # noqa: INP001

import sys
from collections.abc import Iterator
from pathlib import Path
from unittest.mock import patch

import pandas as pd
import pytest
import toml
from loguru import logger
from typer.testing import CliRunner

from gcgail.cli import (
    EXIT_COMPATIBILITY,
    EXIT_INCOMPLETE,
    EXIT_INPUT,
    EXIT_TRAINING,
    app,
    build_train_config,
    default_data_dir,
    load_experiment_config,
    ordering_lines,
    scenario_summary,
)
from gcgail.errors import ConfigError, NumericError
from gcgail.panel.scenarios import Scenario

runner = CliRunner()


@pytest.fixture(autouse=True)
def _restore_logger() -> Iterator[None]:
    yield
    logger.remove()
    logger.add(sys.stderr)


@pytest.fixture
def generator_toml(tmp_path: Path) -> Path:
    """A small generator config."""
    path = tmp_path / 'generator.toml'
    path.write_text(toml.dumps({'generator': {'n_passengers': 40, 'n_stations': 8}}))
    return path


@pytest.fixture
def experiment_toml(tmp_path: Path) -> Path:
    """Experiment file with a short behaviour cloning run."""
    path = tmp_path / 'experiment.toml'
    path.write_text(toml.dumps({'models': ['bc'], 'scenarios': ['full'], 'seeds': [0],
                                'output_dir': str(tmp_path / 'out'),
                                'training': {'bc_max_epochs': 2, 'hidden_dims': [8]}}))
    return path


def test_gen_writes_the_data_directory(tmp_path: Path, generator_toml: Path) -> None:
    """Trips, trajectories, profiles and provenance land in <out>/data."""
    result = runner.invoke(app, ['gen', '--config', str(generator_toml), '--out', str(tmp_path), '--seed', '1',
                                 '--quiet'])
    assert result.exit_code == 0, result.output
    data = tmp_path / 'data'
    for name in ('trips.csv', 'trajectories.jsonl', 'profiles.jsonl', 'provenance.json', 'run.log'):
        assert (data / name).is_file()
    lines = (data / 'trajectories.jsonl').read_text().splitlines()
    assert 0 < len(lines) <= 40  # noqa: PLR2004
    assert len((data / 'profiles.jsonl').read_text().splitlines()) == 40  # noqa: PLR2004


def test_gen_with_missing_config_exits_2(tmp_path: Path) -> None:
    """Configuration errors map to the bad-input code."""
    result = runner.invoke(app, ['gen', '--config', str(tmp_path / 'absent.toml'), '--out', str(tmp_path)])
    assert result.exit_code == EXIT_INPUT


def test_train_with_unknown_scenario_exits_2(tmp_path: Path) -> None:
    """Scenario names are validated before any data is read."""
    result = runner.invoke(app, ['train', '--model', 'bc', '--scenario', 'p55', '--out', str(tmp_path)])
    assert result.exit_code == EXIT_INPUT


def test_eval_with_missing_checkpoint_exits_2(tmp_path: Path) -> None:
    """No checkpoint, no evaluation."""
    result = runner.invoke(app, ['eval', '--run', str(tmp_path / 'bc' / 'full' / '0')])
    assert result.exit_code == EXIT_INPUT


def test_eval_with_a_shallow_run_path_exits_2(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """A run path without an output root above it is bad input, not a crash."""
    monkeypatch.chdir(tmp_path)
    for run in ('nope', '/nope'):
        result = runner.invoke(app, ['eval', '--run', run, '-q'])
        assert result.exit_code == EXIT_INPUT, result.output
    with pytest.raises(ConfigError):
        default_data_dir(Path('/nope'))
    assert default_data_dir(Path('/a/bc/full/0')) == Path('/a/data')


def test_train_divergence_exits_3(tmp_path: Path, generator_toml: Path, experiment_toml: Path) -> None:
    """A non-finite step during training maps to the aborted-training code."""
    out = tmp_path / 'out'
    assert runner.invoke(app, ['gen', '--config', str(generator_toml), '--out', str(out), '-q']).exit_code == 0
    with patch('gcgail.trainers.bc.backprop_logits', side_effect=NumericError('non-finite gradient')):
        result = runner.invoke(app, ['train', '--model', 'bc', '--scenario', 'full', '--seed', '0',
                                     '--out', str(out), '--config', str(experiment_toml), '-q'])
    assert result.exit_code == EXIT_TRAINING, result.output


def test_compare_reports_missing_cells(experiment_toml: Path) -> None:
    """An incomplete matrix exits 5 and lists what is missing."""
    result = runner.invoke(app, ['compare', '--config', str(experiment_toml)])
    assert result.exit_code == EXIT_INCOMPLETE
    assert 'missing: model=bc scenario=full seed=0' in result.output


def test_gen_train_eval_pipeline(tmp_path: Path, generator_toml: Path, experiment_toml: Path) -> None:
    """A tiny end-to-end run writes checkpoint, training log, reports and provenance."""
    out = tmp_path / 'out'
    assert runner.invoke(app, ['gen', '--config', str(generator_toml), '--out', str(out), '-q']).exit_code == 0
    trained = runner.invoke(app, ['train', '--model', 'bc', '--scenario', 'full', '--seed', '0', '--out', str(out),
                                  '--config', str(experiment_toml), '-q'])
    assert trained.exit_code == 0, trained.output
    run = out / 'bc' / 'full' / '0'
    assert (run / 'checkpoint.json').is_file()
    assert (run / 'train_log.csv').is_file()

    evaluated = runner.invoke(app, ['eval', '--run', str(run), '-q'])
    assert evaluated.exit_code == 0, evaluated.output
    for name in ('metrics_global.csv', 'acc_by_month.csv', 'acc_by_adopter_class.csv', 'provenance.json'):
        assert (run / name).is_file()

    refused = runner.invoke(app, ['eval', '--run', str(run), '--conditioning', 'group', '-q'])
    assert refused.exit_code == EXIT_COMPATIBILITY

    compared = runner.invoke(app, ['compare', '--config', str(experiment_toml), '-q'])
    assert compared.exit_code == 0, compared.output
    comparison = pd.read_csv(out / 'comparison.csv')
    assert comparison[['model', 'scenario', 'seed']].values.tolist() == [['bc', 'full', 0]]
    assert (out / 'summary_by_scenario.csv').is_file()
    assert (out / 'ordering.txt').read_text() == ''


def test_train_config_precedence() -> None:
    """Command-line flags beat experiment overrides, which beat the settings file."""
    cfg = build_train_config({'max_iterations': 7, 'patience': 3}, max_iterations=9, rollout_passengers_per_iter=None)
    assert cfg.max_iterations == 9  # noqa: PLR2004
    assert cfg.patience == 3  # noqa: PLR2004
    assert cfg.rollout_passengers_per_iter == 256  # noqa: PLR2004
    with pytest.raises(ConfigError):
        build_train_config({'clip_eps': 2.0})


def test_experiment_config_validation(tmp_path: Path) -> None:
    """Unknown keys, bad scenarios and missing files are configuration errors."""
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / 'absent.toml')
    for bad in ({'scenarios': ['nowhere']}, {'colour': 'red'}, {'seeds': []}):
        path = tmp_path / 'bad.toml'
        path.write_text(toml.dumps(bad))
        with pytest.raises(ConfigError):
            load_experiment_config(path)


def test_ordering_and_summary() -> None:
    """Ordering holds per seed; the drop versus full is relative."""
    comparison = pd.DataFrame([
        {'model': 'gcgail', 'scenario': 'full', 'seed': 0, 'acc': 0.8, 'f1': 0.7, 'acc_adopters': 0.6},
        {'model': 'cgail', 'scenario': 'full', 'seed': 0, 'acc': 0.7, 'f1': 0.6, 'acc_adopters': 0.5},
        {'model': 'gail', 'scenario': 'full', 'seed': 0, 'acc': 0.75, 'f1': 0.6, 'acc_adopters': 0.5},
        {'model': 'gcgail', 'scenario': 'ges', 'seed': 0, 'acc': 0.6, 'f1': 0.5, 'acc_adopters': 0.4},
    ])
    assert ordering_lines(comparison, [Scenario.FULL, Scenario.GES]) == ['seed=0 order=gcgail>=cgail>=gail:false']
    summary = scenario_summary(comparison).set_index(['model', 'scenario'])
    assert summary.loc[('gcgail', 'ges'), 'acc_drop_vs_full'] == pytest.approx(0.25)
    assert summary.loc[('gcgail', 'full'), 'acc_drop_vs_full'] == pytest.approx(0.0)
    assert ordering_lines(comparison[comparison['model'] != 'gail'], [Scenario.FULL]) == []
