"""Unit tests for checkpoints and training logs."""  # noqa: INP001

import json
from pathlib import Path

import numpy as np
import pytest

from gcgail.errors import CompatibilityError, DataValidationError
from gcgail.mdp import ConditioningMode
from gcgail.trainers.bc import train_bc
from gcgail.trainers.checkpoint import (
    Checkpoint,
    load_checkpoint,
    read_training_log,
    save_checkpoint,
    write_training_log,
)
from gcgail.trainers.config import ModelName, TrainConfig
from gcgail.trainers.gail import train_gail
from gcgail.trainers.policy import stack_trajectories


@pytest.fixture
def gail_checkpoint(small_trajectories, fast_train_config: TrainConfig) -> Checkpoint:  # noqa: ANN001
    """Two iterations of gcGAIL on the small population."""
    cfg = fast_train_config.model_copy(update={'max_iterations': 2})
    return Checkpoint.from_gail(ModelName.GCGAIL, train_gail(small_trajectories, cfg), scenario='full', seed=0)


def test_checkpoint_round_trip_predicts_identically(tmp_path: Path, gail_checkpoint: Checkpoint,
                                                    small_trajectories) -> None:  # noqa: ANN001
    """All three networks, the normalizer and the config come back unchanged."""
    path = save_checkpoint(tmp_path / 'checkpoint.json', gail_checkpoint)
    restored = load_checkpoint(path)
    assert restored.model is ModelName.GCGAIL
    assert restored.conditioning is ConditioningMode.GROUP
    assert restored.cfg == gail_checkpoint.cfg
    assert restored.normalizer == gail_checkpoint.normalizer
    assert restored.discriminator is not None
    assert restored.discriminator.adam.step_count == gail_checkpoint.discriminator.adam.step_count
    arrays = stack_trajectories(small_trajectories)
    np.testing.assert_array_equal(restored.policy_model.probabilities(arrays),
                                  gail_checkpoint.policy_model.probabilities(arrays))


def test_bc_checkpoint_has_no_adversarial_networks(tmp_path: Path, small_trajectories,  # noqa: ANN001
                                                   fast_train_config: TrainConfig) -> None:
    """Behaviour cloning stores only its policy."""
    cfg = fast_train_config.for_model(ModelName.BC).model_copy(update={'bc_max_epochs': 2})
    checkpoint = Checkpoint.from_bc(train_bc(small_trajectories, cfg), scenario='p50', seed=3)
    restored = load_checkpoint(save_checkpoint(tmp_path / 'checkpoint.json', checkpoint))
    assert restored.value is None
    assert restored.discriminator is None
    assert (restored.scenario, restored.seed) == ('p50', 3)
    assert restored.conditioning is ConditioningMode.RAW


def test_mismatched_conditioning_is_refused(tmp_path: Path, gail_checkpoint: Checkpoint) -> None:
    """A document whose conditioning disagrees with its config cannot be loaded."""
    path = save_checkpoint(tmp_path / 'checkpoint.json', gail_checkpoint)
    doc = json.loads(path.read_text())
    doc['conditioning'] = 'raw'
    path.write_text(json.dumps(doc))
    with pytest.raises(CompatibilityError):
        load_checkpoint(path)


def test_missing_or_malformed_checkpoint(tmp_path: Path) -> None:
    """Absent files and broken documents raise distinct errors."""
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / 'absent.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"model": "gcgail"}')
    with pytest.raises(DataValidationError):
        load_checkpoint(broken)


def test_training_log_keeps_header_and_rows(tmp_path: Path, small_trajectories,  # noqa: ANN001
                                            fast_train_config: TrainConfig) -> None:
    """Header lines precede the per-iteration CSV."""
    result = train_gail(small_trajectories, fast_train_config.model_copy(update={'max_iterations': 2}))
    header = {'model': 'gcgail', 'seed': 0, 'grad_clip': None, 'excluded_groups': {'flex': 3}}
    path = write_training_log(tmp_path / 'train_log.csv', result.log, header)
    read_header, rows = read_training_log(path)
    assert read_header == header
    assert list(rows.columns) == ['iter', 'disc_loss', 'disc_acc', 'mean_reward', 'ppo_objective', 'value_loss',
                                  'eval_acc', 'wall_ms']
    assert rows['iter'].tolist() == [row.iter for row in result.log]
