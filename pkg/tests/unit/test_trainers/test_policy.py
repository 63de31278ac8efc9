"""Unit tests for greedy prediction, validation carving and the training config."""  # noqa: INP001

import numpy as np
import pytest
from pydantic import ValidationError

from gcgail.errors import CompatibilityError, DataValidationError
from gcgail.mdp import ActionLabel, ConditioningMode
from gcgail.trainers.config import ModelName, TrainConfig
from gcgail.trainers.policy import action_accuracy, carve_validation, greedy, predict_action, stack_trajectories
from tests.conftest import build_trajectory, fixed_policy


def test_greedy_ties_go_to_peak() -> None:
    """[0.7, 0.3] and [0.5, 0.5] both give action 0."""
    assert greedy(np.array([[0.7, 0.3], [0.5, 0.5], [0.2, 0.8]])).tolist() == [0, 0, 1]


def test_predict_action_uses_the_trained_conditioning() -> None:
    """Greedy action of one state; a different mode is refused."""
    trajectory = build_trajectory(0, [0, 1, 1, 0])
    policy = fixed_policy([trajectory], ConditioningMode.GROUP, head_bias=(0.0, 2.0))
    obs = trajectory.observations[1]
    assert predict_action(policy, obs.state, trajectory.condition, ConditioningMode.GROUP) is ActionLabel.OFF_PEAK
    with pytest.raises(CompatibilityError):
        predict_action(policy, obs.state, trajectory.condition, ConditioningMode.RAW)


def test_shifting_logits_keeps_the_prediction() -> None:
    """A shared additive constant on both logits leaves the argmax unchanged."""
    trajectories = [build_trajectory(pid, [0, 1]) for pid in range(3)]
    arrays = stack_trajectories(trajectories)
    base = fixed_policy(trajectories, ConditioningMode.RAW, head_bias=(0.1, 0.4))
    shifted = fixed_policy(trajectories, ConditioningMode.RAW, head_bias=(50.1, 50.4))
    np.testing.assert_array_equal(base.predict(arrays), shifted.predict(arrays))
    assert action_accuracy(base, arrays) == 0.5  # noqa: PLR2004


def test_stacking_is_passenger_major() -> None:
    """Rows follow passengers, then months."""
    arrays = stack_trajectories([build_trajectory(4, [0, 1, 1]), build_trajectory(2, [1, 0])])
    assert arrays.passenger_ids.tolist() == [4, 4, 4, 2, 2]
    assert arrays.months.tolist() == [-2, -1, 0, -2, -1]
    assert arrays.actions.tolist() == [0, 1, 1, 1, 0]
    assert arrays.groups.shape == (5, 3)
    with pytest.raises(DataValidationError):
        stack_trajectories([])


def test_validation_carving() -> None:
    """Ten percent of forty passengers are held out; tiny sets serve both roles."""
    trajectories = [build_trajectory(pid, [0, 1]) for pid in range(40)]
    fit, held = carve_validation(trajectories, 0.1, seed=0)
    assert (len(fit), len(held)) == (36, 4)
    assert not {t.passenger_id for t in fit} & {t.passenger_id for t in held}
    fit, held = carve_validation(trajectories[:3], 0.1, seed=0)
    assert fit == held == trajectories[:3]


def test_model_conditioning() -> None:
    """Each GAIL variant has its own conditioning; BC follows the config."""
    cfg = TrainConfig()
    assert ModelName.GAIL.conditioning(cfg) is ConditioningMode.UNCONDITIONED
    assert ModelName.CGAIL.conditioning(cfg) is ConditioningMode.RAW
    assert cfg.for_model(ModelName.GCGAIL).conditioning_mode is ConditioningMode.GROUP
    assert cfg.for_model(ModelName.BC).conditioning_mode is cfg.bc_conditioning
    assert not ModelName.BC.adversarial


def test_train_config_defaults_and_bounds() -> None:
    """Published defaults; out-of-range values are rejected."""
    cfg = TrainConfig()
    assert (cfg.clip_eps, cfg.gae_lambda, cfg.discount, cfg.learning_rate) == (0.2, 0.95, 0.95, 1e-4)
    assert (cfg.batch_size, cfg.ppo_epochs_per_update, cfg.patience) == (256, 30, 20)
    assert cfg.disc_acc_band == (0.45, 0.55)
    assert cfg.effective_disc_learning_rate == cfg.learning_rate
    for bad in ({'clip_eps': 1.0}, {'discount': 0.0}, {'batch_size': 0}, {'patience': 0},
                {'disc_acc_band': (0.6, 0.4)}, {'unknown': 1}):
        with pytest.raises(ValidationError):
            TrainConfig(**bad)
