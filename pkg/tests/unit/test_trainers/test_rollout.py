"""Unit tests for rollout collection through replayed panels."""  # noqa: INP001

import numpy as np
import pytest

from gcgail.errors import DataValidationError
from gcgail.mdp import IDX, ConditioningMode
from gcgail.panel.types import ExpertTrajectory
from gcgail.trainers.rollout import collect_rollouts
from tests.conftest import build_trajectory, fixed_policy


def _population(n: int, length: int = 16) -> list[ExpertTrajectory]:
    return [build_trajectory(pid, [0] * length, groups=(pid % 4 + 1, (pid + 1) % 4 + 1, 2), tap_in=450.0 + pid % 30)
            for pid in range(n)]


def test_saturated_policy_always_takes_its_argmax() -> None:
    """Logits of +-1000 make sampling deterministic."""
    trajectories = _population(10)
    policy = fixed_policy(trajectories, ConditioningMode.RAW, head_bias=(-1000.0, 1000.0))
    batch = collect_rollouts(policy, None, trajectories, seed=0, iteration=1)
    assert (batch.actions == 1).all()
    np.testing.assert_allclose(batch.log_probs, 0.0, atol=1e-12)


def test_mode_history_follows_sampled_actions() -> None:
    """Off-peak choices replace the expert's peak history from the second month on."""
    trajectories = _population(4)
    policy = fixed_policy(trajectories, ConditioningMode.GROUP, head_bias=(-1000.0, 1000.0))
    batch = collect_rollouts(policy, None, trajectories, seed=0, iteration=1)
    for rows in batch.episodes():
        states = batch.states[rows]
        assert states[0, IDX['lambda_t']] == 0
        assert (states[1:, IDX['lambda_t']] == 1).all()
        assert (states[2:, IDX['lambda_prev']] == 1).all()
        np.testing.assert_array_equal(states[:, IDX['m_p_t']], np.arange(-2, 14))


def test_one_record_per_month() -> None:
    """Episodes of 16 and 5 months give 16 and 5 steps, in passenger order."""
    trajectories = [*_population(2), build_trajectory(7, [0] * 5)]
    policy = fixed_policy(trajectories, ConditioningMode.UNCONDITIONED)
    batch = collect_rollouts(policy, None, trajectories, seed=0, iteration=1)
    assert batch.lengths.tolist() == [16, 16, 5]
    assert len(batch) == 37  # noqa: PLR2004
    assert batch.passenger_ids[-5:].tolist() == [7] * 5
    np.testing.assert_array_equal(batch.values, 0.0)


def test_uniform_policy_hits_half_off_peak() -> None:
    """Equal logits over 10000 steps give an off-peak rate near 0.5."""
    trajectories = _population(625)
    policy = fixed_policy(trajectories, ConditioningMode.GROUP)
    batch = collect_rollouts(policy, None, trajectories, seed=1, iteration=3)
    assert len(batch) == 10_000  # noqa: PLR2004
    assert 0.48 <= batch.actions.mean() <= 0.52  # noqa: PLR2004


def test_rollouts_do_not_depend_on_threads() -> None:
    """Per-passenger random streams make thread count irrelevant."""
    trajectories = _population(100)
    policy = fixed_policy(trajectories, ConditioningMode.GROUP, head_bias=(0.3, -0.2))
    single = collect_rollouts(policy, None, trajectories, seed=5, iteration=2, threads=1, chunk_size=16)
    pooled = collect_rollouts(policy, None, trajectories, seed=5, iteration=2, threads=4, chunk_size=16)
    np.testing.assert_array_equal(single.actions, pooled.actions)
    np.testing.assert_array_equal(single.states, pooled.states)
    other = collect_rollouts(policy, None, trajectories, seed=5, iteration=3, threads=1, chunk_size=16)
    assert not np.array_equal(single.actions, other.actions)


def test_empty_passenger_set() -> None:
    """Nothing to roll out is a validation error."""
    policy = fixed_policy(_population(2), ConditioningMode.GROUP)
    with pytest.raises(DataValidationError):
        collect_rollouts(policy, None, [], seed=0, iteration=1)
