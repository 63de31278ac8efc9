"""Discriminator objective, update and the surrogate reward it induces."""

from typing import NamedTuple

import numpy as np

from gcgail.errors import DataValidationError, ShapeError
from gcgail.mdp import action_one_hot
from gcgail.network import NetworkState, backprop_logits, forward, forward_cache

PROB_CLAMP = 1e-8


def clamp_probability(d: np.ndarray | float) -> np.ndarray | float:
    """Clip discriminator outputs into ``[1e-8, 1 - 1e-8]`` before any logarithm."""
    return np.clip(d, PROB_CLAMP, 1.0 - PROB_CLAMP)


def surrogate_reward(d_value: np.ndarray | float) -> np.ndarray | float:
    """Policy reward ``-log(1 - D)``; increasing in D."""
    return -np.log1p(-clamp_probability(d_value))


def discriminator_inputs(encoded: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Encoded state and condition followed by the one-hot action."""
    return np.concatenate([np.atleast_2d(encoded), action_one_hot(actions)], axis=1)


def discriminator_objective(d_expert: np.ndarray, d_policy: np.ndarray) -> float:
    """``mean log D(expert) + mean log(1 - D(policy))``, maximized by the discriminator."""
    return float(np.mean(np.log(clamp_probability(d_expert))) + np.mean(np.log1p(-clamp_probability(d_policy))))


def discriminator_accuracy(d_expert: np.ndarray, d_policy: np.ndarray) -> float:
    """Classification accuracy at threshold 0.5 with expert as the positive class; 0.5 counts as negative."""
    correct = np.count_nonzero(np.asarray(d_expert) > 0.5) + np.count_nonzero(np.asarray(d_policy) <= 0.5)  # noqa: PLR2004
    return correct / (np.size(d_expert) + np.size(d_policy))


class DiscriminatorStep(NamedTuple):
    """Result of one discriminator update."""

    state: NetworkState
    loss: float
    accuracy: float


def discriminator_update(state: NetworkState,
                         expert_inputs: np.ndarray,
                         policy_inputs: np.ndarray) -> DiscriminatorStep:
    """One Adam step of gradient ascent on the discriminator objective over the full batch.

    The expert and policy means are weighted equally whatever the two row counts. The returned
    objective and accuracy are measured on the same inputs after the step.

    Args:
        state: Discriminator parameters and optimizer.
        expert_inputs: Discriminator inputs of expert pairs.
        policy_inputs: Discriminator inputs of policy pairs, same width.

    Raises:
        DataValidationError: Either side is empty.
        ShapeError: The two sides have different widths.
    """
    expert_inputs, policy_inputs = np.atleast_2d(expert_inputs), np.atleast_2d(policy_inputs)
    if expert_inputs.shape[0] == 0 or policy_inputs.shape[0] == 0:
        msg = 'Discriminator update needs expert and policy samples'
        raise DataValidationError(msg)
    if expert_inputs.shape[1] != policy_inputs.shape[1]:
        msg = f'Expert width {expert_inputs.shape[1]} differs from policy width {policy_inputs.shape[1]}'
        raise ShapeError(msg)

    n_e, n_p = expert_inputs.shape[0], policy_inputs.shape[0]
    cache = forward_cache(state.params, np.concatenate([expert_inputs, policy_inputs]))
    d = cache.output[:, 0]
    # descent direction on -objective, taken at the logit
    grad = np.concatenate([(d[:n_e] - 1.0) / n_e, d[n_e:] / n_p])
    state = state.step(backprop_logits(state.params, cache, grad[:, np.newaxis]))

    d_expert = forward(state.params, expert_inputs)[:, 0]
    d_policy = forward(state.params, policy_inputs)[:, 0]
    return DiscriminatorStep(state=state,
                             loss=discriminator_objective(d_expert, d_policy),
                             accuracy=discriminator_accuracy(d_expert, d_policy))
