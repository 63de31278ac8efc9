"""Generalized advantage estimation and the clipped PPO update."""

from typing import NamedTuple

import numpy as np
from loguru import logger

from gcgail.errors import ShapeError
from gcgail.mdp import action_one_hot
from gcgail.network import NetworkState, backprop_logits, forward_cache, log_softmax, softmax
from gcgail.trainers.config import TrainConfig
from gcgail.trainers.rollout import RolloutBatch

ADVANTAGE_EPS = 1e-8


def compute_gae(rewards: np.ndarray,
                values: np.ndarray,
                gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Advantages and returns of one episode by backward recursion.

    Args:
        rewards: ``[T]`` rewards.
        values: ``[T + 1]`` value estimates, the last one being the terminal bootstrap.
        gamma: Discount factor.
        lam: GAE smoothing factor.

    Returns:
        ``(advantages, returns)``, both ``[T]``, with ``returns = advantages + values[:T]``.

    Raises:
        ShapeError: ``len(values) != len(rewards) + 1``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.ndim != 1 or values.shape != (rewards.shape[0] + 1,):
        msg = f'Expected values of length {rewards.shape[0] + 1}, got shape {values.shape}'
        raise ShapeError(msg)
    deltas = rewards + gamma * values[1:] - values[:-1]
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in range(rewards.shape[0] - 1, -1, -1):
        running = deltas[t] + gamma * lam * running
        advantages[t] = running
    return advantages, advantages + values[:-1]


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero mean and unit standard deviation over the batch."""
    advantages = np.asarray(advantages, dtype=np.float64)
    return (advantages - advantages.mean()) / (advantages.std() + ADVANTAGE_EPS)


def batch_advantages(batch: RolloutBatch, gamma: float, lam: float) -> RolloutBatch:
    """Fill advantages and returns episode by episode with a zero terminal value."""
    raw = np.zeros(len(batch))
    returns = np.zeros(len(batch))
    for rows in batch.episodes():
        values = np.append(batch.values[rows], 0.0)
        raw[rows], returns[rows] = compute_gae(batch.rewards[rows], values, gamma, lam)
    return batch.with_updates(raw_advantages=raw, advantages=normalize_advantages(raw), returns=returns)


def clipped_objective(ratio: np.ndarray | float, advantage: np.ndarray | float, clip_eps: float) -> np.ndarray | float:
    """Per-sample ``min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)``."""
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantage)


class PpoResult(NamedTuple):
    """Updated networks and the averaged diagnostics of one PPO update."""

    policy: NetworkState
    value: NetworkState
    objective: float
    value_loss: float
    skipped: int


def ppo_update(policy: NetworkState,
               value: NetworkState,
               batch: RolloutBatch,
               cfg: TrainConfig,
               rng: np.random.Generator) -> PpoResult:
    """Clipped-surrogate ascent on the policy and squared-error descent on the value network.

    Runs ``cfg.ppo_epochs_per_update`` epochs over shuffled minibatches of ``cfg.batch_size``. The
    objective reported is the mean over minibatches, each measured before its own step. Samples
    with a non-finite ratio are dropped from the step and counted.
    """
    n = len(batch)
    objectives, value_losses, skipped = [], [], 0
    for _ in range(cfg.ppo_epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            x, actions, adv = batch.inputs[idx], batch.actions[idx], batch.advantages[idx]

            cache = forward_cache(policy.params, x)
            new_log_probs = log_softmax(cache.logits)[np.arange(idx.size), actions]
            with np.errstate(over='ignore', invalid='ignore'):
                ratio = np.exp(new_log_probs - batch.log_probs[idx])
                finite = np.isfinite(ratio)
                ratio = np.where(finite, ratio, 1.0)
            skipped += int(idx.size - finite.sum())
            if finite.any():
                terms = clipped_objective(ratio[finite], adv[finite], cfg.clip_eps)
                objectives.append(float(terms.mean()))
                # gradient flows only where the unclipped term is the minimum
                active = finite & (ratio * adv <= np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv)
                d_log_prob = np.where(active, ratio * adv, 0.0) / finite.sum()
                grad_logits = -d_log_prob[:, np.newaxis] * (action_one_hot(actions) - softmax(cache.logits))
                policy = policy.step(backprop_logits(policy.params, cache, grad_logits))

            v_cache = forward_cache(value.params, x)
            error = v_cache.output[:, 0] - batch.returns[idx]
            value_losses.append(float(cfg.value_coef * np.mean(error ** 2)))
            grad_v = (2.0 * cfg.value_coef / idx.size) * error
            value = value.step(backprop_logits(value.params, v_cache, grad_v[:, np.newaxis]))
    if skipped:
        logger.warning('PPO samples skipped for non-finite ratio', skipped=skipped)
    return PpoResult(policy=policy, value=value,
                     objective=float(np.mean(objectives)) if objectives else float('nan'),
                     value_loss=float(np.mean(value_losses)), skipped=skipped)
