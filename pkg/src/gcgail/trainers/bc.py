"""Behaviour cloning baseline: supervised cross-entropy on expert (state, action) pairs."""

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from pydantic import BaseModel

from gcgail.errors import DataValidationError, TrainingDivergedError, numeric_errors_as_divergence
from gcgail.mdp import FeatureNormalizer, action_one_hot
from gcgail.network import MlpSpec, NetworkParams, NetworkState, backprop_logits, forward_cache, log_softmax, softmax
from gcgail.panel.types import ExpertTrajectory
from gcgail.trainers.config import TrainConfig
from gcgail.trainers.policy import PolicyModel, action_accuracy, carve_validation, stack_trajectories


class BcLogRow(BaseModel):
    """One epoch of behaviour cloning."""

    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    wall_ms: int


@dataclass(frozen=True)
class BcResult:
    """Best policy found by `train_bc` and its epoch log."""

    params: NetworkParams
    state: NetworkState
    normalizer: FeatureNormalizer
    cfg: TrainConfig
    best_epoch: int
    log: list[BcLogRow] = field(default_factory=list)

    @property
    def policy(self) -> PolicyModel:
        """The best policy with its encoder."""
        return PolicyModel(params=self.params, normalizer=self.normalizer, mode=self.cfg.conditioning_mode)


def cross_entropy(params: NetworkParams, inputs: np.ndarray, actions: np.ndarray) -> float:
    """Mean negative log-likelihood of the actions."""
    log_probs = log_softmax(forward_cache(params, inputs).logits)
    return float(-log_probs[np.arange(actions.size), actions].mean())


def train_bc(train_set: Sequence[ExpertTrajectory],
             cfg: TrainConfig,
             *,
             validation: Sequence[ExpertTrajectory] | None = None) -> BcResult:
    """Fit a policy to expert actions with Adam, stopping on held-out loss.

    Args:
        train_set: Expert trajectories.
        cfg: Uses ``bc_learning_rate``, ``bc_max_epochs``, ``batch_size``, ``patience``, ``seed`` and
            ``conditioning_mode``.
        validation: Held-out passengers; carved out of `train_set` when omitted.

    Returns:
        The parameters with the lowest held-out loss.
    """
    if not train_set:
        msg = 'train_bc needs at least one training trajectory'
        raise DataValidationError(msg)
    if validation is None:
        fit_set, validation = carve_validation(train_set, cfg.validation_fraction, cfg.seed)
    else:
        fit_set = list(train_set)
    expert, held_out = stack_trajectories(fit_set), stack_trajectories(validation)
    mode = cfg.conditioning_mode
    normalizer = FeatureNormalizer.fit(expert.states, expert.cond_raw)
    x = normalizer.encode_arrays(expert.states, expert.cond_raw, expert.groups, mode)
    x_val = normalizer.encode_arrays(held_out.states, held_out.cond_raw, held_out.groups, mode)

    rng = np.random.default_rng(cfg.seed)
    state = NetworkState.create(MlpSpec.policy(mode.input_dim, hidden_dims=cfg.hidden_dims), rng,
                                cfg.bc_learning_rate)
    best_state, best_loss, best_epoch, stale = state, math.inf, 0, 0
    log: list[BcLogRow] = []
    for epoch in range(1, cfg.bc_max_epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(expert))
        losses = []
        with numeric_errors_as_divergence('Behaviour cloning', epoch):
            for start in range(0, len(expert), cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                cache = forward_cache(state.params, x[idx])
                actions = expert.actions[idx]
                losses.append(float(-log_softmax(cache.logits)[np.arange(idx.size), actions].mean()))
                grad = (softmax(cache.logits) - action_one_hot(actions)) / idx.size
                state = state.step(backprop_logits(state.params, cache, grad))
            val_loss = cross_entropy(state.params, x_val, held_out.actions)

        if not math.isfinite(val_loss):
            logger.error('Behaviour cloning diverged', epoch=epoch, val_loss=val_loss)
            msg = f'Non-finite validation loss at epoch {epoch}'
            raise TrainingDivergedError(msg)
        val_acc = action_accuracy(PolicyModel(state.params, normalizer, mode), held_out)
        if val_loss < best_loss:
            best_state, best_loss, best_epoch, stale = state, val_loss, epoch, 0
        else:
            stale += 1
        log.append(BcLogRow(epoch=epoch, train_loss=float(np.mean(losses)), val_loss=val_loss, val_acc=val_acc,
                            wall_ms=round((time.perf_counter() - started) * 1000)))
        logger.debug('BC epoch', epoch=epoch, val_loss=val_loss, val_acc=val_acc)
        if stale >= cfg.patience:
            break

    logger.info('Behaviour cloning finished', epochs=len(log), best_epoch=best_epoch, best_val_loss=best_loss)
    return BcResult(params=best_state.params, state=best_state, normalizer=normalizer, cfg=cfg,
                    best_epoch=best_epoch, log=log)
