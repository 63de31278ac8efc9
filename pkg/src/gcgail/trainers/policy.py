"""Stacked expert data, the trained policy bundle and greedy prediction."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger

from gcgail.errors import CompatibilityError, DataValidationError
from gcgail.mdp import STATE_DIM, ActionLabel, ConditioningMode, ConditionVector, FeatureNormalizer, StateVector
from gcgail.network import NetworkParams, forward, logits, softmax
from gcgail.panel.types import ExpertTrajectory

_VALIDATION_STREAM = 2


@dataclass(frozen=True)
class ExpertArrays:
    """Expert (state, action) pairs flattened across passengers, passenger-major then month order."""

    states: np.ndarray  # [n, 11]
    cond_raw: np.ndarray  # [n, 3]
    groups: np.ndarray  # [n, 3]
    actions: np.ndarray  # [n]
    passenger_ids: np.ndarray  # [n]
    months: np.ndarray  # [n]

    def __len__(self) -> int:
        """Number of (state, action) pairs."""
        return int(self.actions.shape[0])

    def take(self, index: np.ndarray) -> 'ExpertArrays':
        """Rows at `index`."""
        return ExpertArrays(states=self.states[index], cond_raw=self.cond_raw[index], groups=self.groups[index],
                            actions=self.actions[index], passenger_ids=self.passenger_ids[index],
                            months=self.months[index])


def stack_trajectories(trajectories: Sequence[ExpertTrajectory]) -> ExpertArrays:
    """Flatten trajectories into row arrays.

    Raises:
        DataValidationError: No trajectory given.
    """
    if not trajectories:
        msg = 'Cannot stack an empty trajectory set'
        raise DataValidationError(msg)
    lengths = [len(t) for t in trajectories]
    return ExpertArrays(
        states=np.concatenate([t.states() for t in trajectories]).reshape(-1, STATE_DIM),
        cond_raw=np.repeat(np.stack([t.condition.raw for t in trajectories]), lengths, axis=0),
        groups=np.repeat(np.stack([t.condition.groups for t in trajectories]), lengths, axis=0),
        actions=np.concatenate([t.actions() for t in trajectories]),
        passenger_ids=np.repeat([t.passenger_id for t in trajectories], lengths),
        months=np.concatenate([[obs.month_index for obs in t.observations] for t in trajectories]),
    )


def carve_validation(trajectories: Sequence[ExpertTrajectory],
                     fraction: float,
                     seed: int) -> tuple[list[ExpertTrajectory], list[ExpertTrajectory]]:
    """Hold out ``round(fraction * n)`` passengers for early stopping.

    When that rounds to zero or to everyone, the full set serves both roles.
    """
    ordered = list(trajectories)
    n_val = round(fraction * len(ordered))
    if n_val == 0 or n_val >= len(ordered):
        logger.debug('No separate validation set', passengers=len(ordered), fraction=fraction)
        return ordered, ordered
    held = set(np.random.default_rng([seed, _VALIDATION_STREAM]).permutation(len(ordered))[:n_val].tolist())
    return ([t for k, t in enumerate(ordered) if k not in held],
            [t for k, t in enumerate(ordered) if k in held])


def greedy(probabilities: np.ndarray) -> np.ndarray:
    """Argmax over two actions with ties going to action 0."""
    probabilities = np.atleast_2d(probabilities)
    return (probabilities[:, 1] > probabilities[:, 0]).astype(np.int64)


@dataclass(frozen=True)
class PolicyModel:
    """Policy network with the normalizer and conditioning it was trained with."""

    params: NetworkParams
    normalizer: FeatureNormalizer
    mode: ConditioningMode

    def encode(self, states: np.ndarray, cond_raw: np.ndarray, groups: np.ndarray) -> np.ndarray:
        """Network inputs for a batch."""
        return self.normalizer.encode_arrays(states, cond_raw, groups, self.mode)

    def probabilities(self, arrays: ExpertArrays) -> np.ndarray:
        """``[n, 2]`` action probabilities."""
        return softmax(logits(self.params, self.encode(arrays.states, arrays.cond_raw, arrays.groups)))

    def predict(self, arrays: ExpertArrays) -> np.ndarray:
        """Greedy actions for every row."""
        return greedy(self.probabilities(arrays))


def predict_action(policy: PolicyModel,
                   state: StateVector,
                   condition: ConditionVector,
                   mode: ConditioningMode) -> ActionLabel:
    """Greedy action for one state.

    Raises:
        CompatibilityError: `mode` differs from the policy's conditioning.
    """
    if mode is not policy.mode:
        msg = f'Policy was trained with {policy.mode.value} conditioning, requested {mode.value}'
        raise CompatibilityError(msg)
    probabilities = forward(policy.params, policy.normalizer.encode(state, condition, mode).features)
    return ActionLabel(int(greedy(probabilities)[0]))


def action_accuracy(policy: PolicyModel, arrays: ExpertArrays) -> float:
    """Share of rows whose greedy action equals the expert action."""
    return float(np.mean(policy.predict(arrays) == arrays.actions))
