"""Policy rollouts through the replayed passenger panels."""

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from loguru import logger

from gcgail.errors import DataValidationError
from gcgail.mdp import transition_array
from gcgail.network import NetworkParams, forward, log_softmax, logits, softmax
from gcgail.panel.types import ExpertTrajectory
from gcgail.trainers.policy import PolicyModel


@dataclass(frozen=True)
class RolloutBatch:
    """Policy steps of one iteration, episode-major.

    Episode ``k`` occupies rows ``offsets[k]:offsets[k + 1]``. Rewards, advantages and returns are
    zero until the trainer fills them.
    """

    inputs: np.ndarray  # encoded policy inputs
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    passenger_ids: np.ndarray
    lengths: np.ndarray
    rewards: np.ndarray = field(default=None)  # type: ignore[assignment]
    raw_advantages: np.ndarray = field(default=None)  # type: ignore[assignment]
    advantages: np.ndarray = field(default=None)  # type: ignore[assignment]
    returns: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        """Zero-fill the fields computed later."""
        n = self.actions.shape[0]
        for name in ('rewards', 'raw_advantages', 'advantages', 'returns'):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(n))
        if int(self.lengths.sum()) != n:
            msg = f'Episode lengths sum to {int(self.lengths.sum())}, batch has {n} steps'
            raise DataValidationError(msg)

    def __len__(self) -> int:
        """Number of steps."""
        return int(self.actions.shape[0])

    @property
    def offsets(self) -> np.ndarray:
        """Episode boundaries, ``len(lengths) + 1`` entries."""
        return np.concatenate([[0], np.cumsum(self.lengths)])

    def episodes(self) -> list[slice]:
        """Row slice of every episode."""
        offsets = self.offsets
        return [slice(int(offsets[k]), int(offsets[k + 1])) for k in range(len(self.lengths))]

    def with_updates(self, **changes: np.ndarray) -> 'RolloutBatch':
        """Copy with some arrays replaced."""
        return replace(self, **changes)


def _rollout_group(policy: PolicyModel,
                   value: NetworkParams | None,
                   trajectories: Sequence[ExpertTrajectory],
                   seed: int,
                   iteration: int) -> RolloutBatch:
    """Roll out passengers whose panels share one length, all months stepped together."""
    n, horizon = len(trajectories), len(trajectories[0])
    observed = np.stack([t.states() for t in trajectories])  # [n, T, 11]
    cond_raw = np.stack([t.condition.raw for t in trajectories])
    groups = np.stack([t.condition.groups for t in trajectories])
    uniforms = np.stack([np.random.default_rng([seed, iteration, t.passenger_id]).random(horizon)
                         for t in trajectories])

    inputs, states, actions, log_probs, values = [], [], [], [], []
    s = observed[:, 0]
    rows = np.arange(n)
    for t in range(horizon):
        x = policy.encode(s, cond_raw, groups)
        z = logits(policy.params, x)
        a = (uniforms[:, t] < softmax(z)[:, 1]).astype(np.int64)
        inputs.append(x)
        states.append(s)
        actions.append(a)
        log_probs.append(log_softmax(z)[rows, a])
        values.append(forward(value, x)[:, 0] if value is not None else np.zeros(n))
        if t + 1 < horizon:
            s = transition_array(s, a, observed[:, t + 1])

    def episode_major(parts: list[np.ndarray]) -> np.ndarray:
        stacked = np.stack(parts, axis=1)  # [n, T, ...]
        return stacked.reshape(n * horizon, *stacked.shape[2:])

    return RolloutBatch(inputs=episode_major(inputs), states=episode_major(states), actions=episode_major(actions),
                        log_probs=episode_major(log_probs), values=episode_major(values),
                        passenger_ids=np.repeat([t.passenger_id for t in trajectories], horizon),
                        lengths=np.full(n, horizon, dtype=np.int64))


def _rollout_chunk(policy: PolicyModel,
                   value: NetworkParams | None,
                   trajectories: Sequence[ExpertTrajectory],
                   seed: int,
                   iteration: int) -> RolloutBatch:
    # consecutive runs of equal panel length keep passenger order intact
    parts, start = [], 0
    for k in range(1, len(trajectories) + 1):
        if k == len(trajectories) or len(trajectories[k]) != len(trajectories[start]):
            parts.append(_rollout_group(policy, value, trajectories[start:k], seed, iteration))
            start = k
    return concat_batches(parts)


def concat_batches(batches: Sequence[RolloutBatch]) -> RolloutBatch:
    """Join batches in order."""
    if len(batches) == 1:
        return batches[0]
    names = ('inputs', 'states', 'actions', 'log_probs', 'values', 'passenger_ids', 'lengths',
             'rewards', 'raw_advantages', 'advantages', 'returns')
    return RolloutBatch(**{name: np.concatenate([getattr(b, name) for b in batches]) for name in names})


def collect_rollouts(policy: PolicyModel,
                     value: NetworkParams | None,
                     trajectories: Sequence[ExpertTrajectory],
                     *,
                     seed: int,
                     iteration: int,
                     threads: int = 1,
                     chunk_size: int = 64) -> RolloutBatch:
    """Sample one episode per passenger with the current policy.

    Each episode starts from the passenger's first observed state and replays the panel: actions are
    sampled from the policy, the mode history follows the sampled actions and the trip statistics
    follow the panel. Random draws come from a stream per ``(seed, iteration, passenger)`` and chunks
    have a fixed size, so results do not depend on `threads`.

    Args:
        policy: Current policy snapshot.
        value: Value network, or None to record zero value estimates.
        trajectories: Passengers to roll out.
        seed: Run seed.
        iteration: Training iteration.
        threads: Worker threads.
        chunk_size: Passengers per work item.

    Returns:
        The batch in passenger order.

    Raises:
        DataValidationError: No passenger given.
    """
    if not trajectories:
        msg = 'Cannot collect rollouts from an empty passenger set'
        raise DataValidationError(msg)
    chunks = [trajectories[k:k + chunk_size] for k in range(0, len(trajectories), chunk_size)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _rollout_chunk(policy, value, c, seed, iteration), chunks))
    else:
        parts = [_rollout_chunk(policy, value, c, seed, iteration) for c in chunks]
    batch = concat_batches(parts)
    logger.debug('Rollouts collected', passengers=len(trajectories), steps=len(batch),
                 off_peak_rate=float(batch.actions.mean()))
    return batch
