"""End-to-end runs: degenerate experts, pipeline determinism and the seeded benchmark."""  # noqa: INP001

import sys
from collections.abc import Iterator
from pathlib import Path

import pandas as pd
import pytest
import toml
from loguru import logger
from typer.testing import CliRunner

from gcgail.cli import app
from gcgail.evaluation import breakdown, evaluation_records, global_cell
from gcgail.panel.adopters import classify_adopters
from gcgail.panel.features import PromotionConfig, extract_features
from gcgail.panel.generator import GeneratorConfig, synthesize_population
from gcgail.panel.scenarios import split_and_filter
from gcgail.trainers.config import ModelName, TrainConfig
from gcgail.trainers.gail import train_gail

runner = CliRunner()


@pytest.fixture(autouse=True)
def _restore_logger() -> Iterator[None]:
    yield
    logger.remove()
    logger.add(sys.stderr)


@pytest.mark.parametrize('model', [ModelName.GCGAIL, ModelName.CGAIL, ModelName.GAIL])
def test_constant_expert_pipeline(model: ModelName, fast_train_config: TrainConfig) -> None:
    """Nobody adopts, so every label is peak and the learned policy predicts peak."""
    gen_cfg = GeneratorConfig(n_passengers=500, n_stations=12, beta_0=-40.0, trial_rate=0.0)
    trips, profiles = synthesize_population(gen_cfg, seed=5)
    promotion = PromotionConfig(start_date=gen_cfg.promotion_start, discount_stations=gen_cfg.discount_set)
    trajectories = extract_features(trips, promotion, profiles)
    assert all(int(obs.action) == 0 for t in trajectories for obs in t.observations)

    train, test = split_and_filter(trajectories, 'full', seed=0)
    cfg = fast_train_config.for_model(model).model_copy(update={'max_iterations': 100})
    result = train_gail(train, cfg)
    records = evaluation_records(result.policy, test, classify_adopters(test))
    assert global_cell(records).metrics.accuracy >= 0.99  # noqa: PLR2004
    assert len(breakdown(records, 'month').cells) == 16  # noqa: PLR2004


def _experiment(root: Path) -> Path:
    generator = root / 'generator.toml'
    generator.write_text(toml.dumps({'n_passengers': 60, 'n_stations': 10}))
    path = root / 'experiment.toml'
    path.write_text(toml.dumps({'generator_config': str(generator), 'models': ['bc', 'gcgail'],
                                'scenarios': ['full'], 'seeds': [0], 'output_dir': str(root / 'out'),
                                'training': {'max_iterations': 2, 'rollout_passengers_per_iter': 16,
                                             'hidden_dims': [8, 8], 'ppo_epochs_per_update': 2,
                                             'batch_size': 64, 'bc_max_epochs': 3}}))
    return path


def test_pipeline_is_byte_identical_across_runs(tmp_path: Path) -> None:
    """Two full runs with the same configs and seeds agree byte for byte."""
    outputs = []
    for name in ('first', 'second'):
        root = tmp_path / name
        root.mkdir()
        result = runner.invoke(app, ['compare', '--config', str(_experiment(root)), '--run-missing', '-q'])
        assert result.exit_code == 0, result.output
        outputs.append(root / 'out')
    first, second = outputs
    for relative in ('data/trajectories.jsonl', 'data/trips.csv', 'gcgail/full/0/checkpoint.json',
                     'bc/full/0/checkpoint.json', 'comparison.csv'):
        assert (first / relative).read_bytes() == (second / relative).read_bytes(), relative


@pytest.fixture(scope='module')
def benchmark(tmp_path_factory: pytest.TempPathFactory) -> pd.DataFrame:
    """Comparison table of the three adversarial models on five seeds and three scenarios."""
    root = tmp_path_factory.mktemp('benchmark')
    path = root / 'experiment.toml'
    path.write_text(toml.dumps({'models': ['gail', 'cgail', 'gcgail'], 'scenarios': ['full', 'ges', 'half_stations'],
                                'seeds': [0, 1, 2, 3, 4], 'output_dir': str(root / 'out')}))
    result = runner.invoke(app, ['compare', '--config', str(path), '--run-missing', '-q'])
    assert result.exit_code == 0, result.output
    return pd.read_csv(root / 'out' / 'comparison.csv')


def _accuracy(frame: pd.DataFrame, model: str, scenario: str) -> pd.Series:
    rows = frame[(frame['model'] == model) & (frame['scenario'] == scenario)]
    return rows.set_index('seed')['acc'].astype(float)


def _drop(frame: pd.DataFrame, model: str, scenario: str) -> pd.Series:
    full = _accuracy(frame, model, 'full')
    return (full - _accuracy(frame, model, scenario)) / full


@pytest.mark.slow
def test_group_conditioning_ranks_first(benchmark: pd.DataFrame) -> None:
    """gcGAIL >= cGAIL >= GAIL on at least four of five seeds, with high mean accuracy."""
    gc, c, plain = (_accuracy(benchmark, m, 'full') for m in ('gcgail', 'cgail', 'gail'))
    assert int(((gc >= c) & (c >= plain)).sum()) >= 4  # noqa: PLR2004
    assert gc.mean() >= 0.85  # noqa: PLR2004


@pytest.mark.slow
def test_group_exclusion_hurts_group_conditioning_less(benchmark: pd.DataFrame) -> None:
    """Leaving out the responsive groups costs gcGAIL less than cGAIL."""
    assert int((_drop(benchmark, 'gcgail', 'ges') < _drop(benchmark, 'cgail', 'ges')).sum()) >= 4  # noqa: PLR2004


@pytest.mark.slow
def test_half_network_hurts_group_conditioning_less(benchmark: pd.DataFrame) -> None:
    """Training on half of the stations costs gcGAIL no more than GAIL."""
    gc = _drop(benchmark, 'gcgail', 'half_stations')
    plain = _drop(benchmark, 'gail', 'half_stations')
    assert int((gc <= plain).sum()) >= 4  # noqa: PLR2004
