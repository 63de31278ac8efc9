"""Adversarial imitation training loop shared by GAIL, cGAIL and gcGAIL.

The three models differ only in ``cfg.conditioning_mode``. Each iteration samples one episode per
selected passenger, updates the discriminator once, rewards policy steps with ``-log(1 - D)``,
computes advantages and runs the PPO update, then scores the policy on held-out passengers.
"""

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from loguru import logger
from pydantic import BaseModel

from gcgail.errors import DataValidationError, TrainingDivergedError, numeric_errors_as_divergence
from gcgail.mdp import FeatureNormalizer
from gcgail.network import MlpSpec, NetworkState, forward
from gcgail.panel.types import ExpertTrajectory
from gcgail.trainers.config import TrainConfig
from gcgail.trainers.discriminator import discriminator_inputs, discriminator_update, surrogate_reward
from gcgail.trainers.policy import PolicyModel, action_accuracy, carve_validation, stack_trajectories
from gcgail.trainers.ppo import batch_advantages, ppo_update
from gcgail.trainers.rollout import collect_rollouts


class StopReason(str, Enum):
    """Why a training loop ended."""

    PATIENCE = 'patience'
    DISCRIMINATOR_BAND = 'discriminator_band'
    MAX_ITERATIONS = 'max_iterations'


@dataclass
class StoppingMonitor:
    """Tracks both stopping rules.

    Patience counts evaluations since the best score last strictly improved. The discriminator rule
    fires after ``dwell`` consecutive in-band accuracies, counting only iterations past the warm-up.
    """

    patience: int
    band: tuple[float, float]
    dwell: int
    warmup: int = 0
    best_score: float = -math.inf
    evals_since_improvement: int = 0
    in_band_streak: int = 0

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> 'StoppingMonitor':
        """Monitor with the configured thresholds."""
        return cls(patience=cfg.patience, band=cfg.disc_acc_band, dwell=cfg.disc_band_dwell,
                   warmup=cfg.warmup_iterations)

    def update(self,
               iteration: int,
               score: float,
               disc_accuracy: float | None = None) -> tuple[bool, StopReason | None]:
        """Record one evaluation (and optionally a discriminator accuracy).

        Args:
            iteration: 1-based iteration number.
            score: Held-out evaluation score.
            disc_accuracy: Discriminator accuracy of this iteration.

        Returns:
            Whether the score improved, and the stop reason if a rule fired.
        """
        improved = score > self.best_score
        if improved:
            self.best_score = score
            self.evals_since_improvement = 0
        else:
            self.evals_since_improvement += 1
        if disc_accuracy is not None and iteration > self.warmup:
            lo, hi = self.band
            self.in_band_streak = self.in_band_streak + 1 if lo <= disc_accuracy <= hi else 0
        if self.evals_since_improvement >= self.patience:
            return improved, StopReason.PATIENCE
        if self.in_band_streak >= self.dwell:
            return improved, StopReason.DISCRIMINATOR_BAND
        return improved, None


@dataclass(frozen=True)
class TrainerState:
    """Networks, optimizers and stopping bookkeeping after an iteration."""

    policy: NetworkState
    value: NetworkState
    discriminator: NetworkState
    iteration: int = 0
    best_eval: float = -math.inf
    evals_since_improvement: int = 0


class TrainingLogRow(BaseModel):
    """One row of the training log."""

    iter: int
    disc_loss: float
    disc_acc: float
    mean_reward: float
    ppo_objective: float
    value_loss: float
    eval_acc: float
    wall_ms: int


@dataclass(frozen=True)
class GailResult:
    """Outcome of `train_gail`; `best` is the state at the best held-out score."""

    best: TrainerState
    final: TrainerState
    normalizer: FeatureNormalizer
    cfg: TrainConfig
    stop_reason: StopReason
    log: list[TrainingLogRow] = field(default_factory=list)

    @property
    def policy(self) -> PolicyModel:
        """The best policy with its encoder."""
        return PolicyModel(params=self.best.policy.params, normalizer=self.normalizer, mode=self.cfg.conditioning_mode)


def initial_state(cfg: TrainConfig, rng: np.random.Generator) -> TrainerState:
    """Freshly initialized policy, value and discriminator networks."""
    width = cfg.conditioning_mode.input_dim
    return TrainerState(
        policy=NetworkState.create(MlpSpec.policy(width, hidden_dims=cfg.hidden_dims), rng, cfg.learning_rate),
        value=NetworkState.create(MlpSpec.value(width, hidden_dims=cfg.hidden_dims), rng, cfg.learning_rate),
        discriminator=NetworkState.create(MlpSpec.discriminator(width + 2, hidden_dims=cfg.hidden_dims), rng,
                                          cfg.effective_disc_learning_rate))


def _check_finite(iteration: int, **values: float) -> None:
    bad = {name: value for name, value in values.items() if not math.isfinite(value)}
    if bad:
        logger.error('Training diverged', iteration=iteration, **values)
        msg = f'Non-finite training quantities at iteration {iteration}: {bad}'
        raise TrainingDivergedError(msg)


def train_gail(train_set: Sequence[ExpertTrajectory],
               cfg: TrainConfig,
               *,
               validation: Sequence[ExpertTrajectory] | None = None,
               threads: int = 1) -> GailResult:
    """Train a policy against a discriminator until a stopping rule fires.

    Args:
        train_set: Expert trajectories of the training passengers.
        cfg: Hyperparameters; ``conditioning_mode`` selects the model.
        validation: Held-out passengers for early stopping; carved out of `train_set` when omitted.
        threads: Rollout worker threads.

    Returns:
        The best and final states together with the per-iteration log.

    Raises:
        DataValidationError: Empty training set.
        TrainingDivergedError: A loss became non-finite or a step produced non-finite numbers.
    """
    if not train_set:
        msg = 'train_gail needs at least one training trajectory'
        raise DataValidationError(msg)
    if validation is None:
        fit_set, validation = carve_validation(train_set, cfg.validation_fraction, cfg.seed)
    else:
        fit_set = list(train_set)
    expert = stack_trajectories(fit_set)
    held_out = stack_trajectories(validation)
    mode = cfg.conditioning_mode
    normalizer = FeatureNormalizer.fit(expert.states, expert.cond_raw)
    expert_disc = discriminator_inputs(normalizer.encode_arrays(expert.states, expert.cond_raw, expert.groups, mode),
                                       expert.actions)

    rng = np.random.default_rng(cfg.seed)
    state = initial_state(cfg, rng)
    best = state
    monitor = StoppingMonitor.from_config(cfg)
    log: list[TrainingLogRow] = []
    reason = StopReason.MAX_ITERATIONS
    logger.info('GAIL training started', conditioning=mode.value, passengers=len(fit_set),
                validation=len(validation), seed=cfg.seed)

    for iteration in range(1, cfg.max_iterations + 1):
        started = time.perf_counter()
        with numeric_errors_as_divergence('GAIL training', iteration):
            n_rollout = min(cfg.rollout_passengers_per_iter, len(fit_set))
            subset = [fit_set[k] for k in np.sort(rng.choice(len(fit_set), size=n_rollout, replace=False))]
            batch = collect_rollouts(PolicyModel(state.policy.params, normalizer, mode), state.value.params, subset,
                                     seed=cfg.seed, iteration=iteration, threads=threads,
                                     chunk_size=cfg.rollout_chunk)

            policy_disc = discriminator_inputs(batch.inputs, batch.actions)
            expert_rows = rng.integers(0, len(expert), size=len(batch))
            disc = discriminator_update(state.discriminator, expert_disc[expert_rows], policy_disc)
            rewards = surrogate_reward(forward(disc.state.params, policy_disc)[:, 0])
            batch = batch_advantages(batch.with_updates(rewards=rewards), cfg.discount, cfg.gae_lambda)
            ppo = ppo_update(state.policy, state.value, batch, cfg, rng)
            _check_finite(iteration, disc_loss=disc.loss, ppo_objective=ppo.objective, value_loss=ppo.value_loss)
            eval_acc = action_accuracy(PolicyModel(ppo.policy.params, normalizer, mode), held_out)

        improved, stop = monitor.update(iteration, eval_acc, disc.accuracy)
        state = TrainerState(policy=ppo.policy, value=ppo.value, discriminator=disc.state, iteration=iteration,
                             best_eval=monitor.best_score, evals_since_improvement=monitor.evals_since_improvement)
        if improved:
            best = state
        row = TrainingLogRow(iter=iteration, disc_loss=disc.loss, disc_acc=disc.accuracy,
                             mean_reward=float(rewards.mean()), ppo_objective=ppo.objective,
                             value_loss=ppo.value_loss, eval_acc=eval_acc,
                             wall_ms=round((time.perf_counter() - started) * 1000))
        log.append(row)
        logger.info('Iteration {iter}: eval_acc={eval_acc:.4f} disc_acc={disc_acc:.3f}', **row.model_dump())
        if stop is not None:
            reason = stop
            break

    logger.info('GAIL training finished', reason=reason.value, iterations=state.iteration,
                best_iteration=best.iteration, best_eval=best.best_eval)
    return GailResult(best=best, final=state, normalizer=normalizer, cfg=cfg, stop_reason=reason, log=log)
