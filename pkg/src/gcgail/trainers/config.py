"""Training hyperparameters and model names."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator

from gcgail.mdp import ConditioningMode
from gcgail.network import DEFAULT_HIDDEN


class ModelName(str, Enum):
    """Trainable models."""

    BC = 'bc'
    GAIL = 'gail'
    CGAIL = 'cgail'
    GCGAIL = 'gcgail'

    @property
    def adversarial(self) -> bool:
        """True for the GAIL family."""
        return self is not ModelName.BC

    def conditioning(self, cfg: 'TrainConfig') -> ConditioningMode:
        """Conditioning used by this model; BC follows ``cfg.bc_conditioning``."""
        return {ModelName.BC: cfg.bc_conditioning,
                ModelName.GAIL: ConditioningMode.UNCONDITIONED,
                ModelName.CGAIL: ConditioningMode.RAW,
                ModelName.GCGAIL: ConditioningMode.GROUP}[self]


class TrainConfig(BaseModel):
    """Hyperparameters shared by the trainers.

    PPO, GAE, learning rate, batch size, epochs and both stopping rules default to the published
    settings; the rest are run-size knobs.
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    clip_eps: float = Field(default=0.2, gt=0.0, lt=1.0)
    gae_lambda: float = Field(default=0.95, gt=0.0, le=1.0)
    discount: float = Field(default=0.95, gt=0.0, le=1.0)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    disc_learning_rate: float | None = Field(default=None, ge=0.0)
    batch_size: PositiveInt = 256
    ppo_epochs_per_update: PositiveInt = 30
    seed: int = 0
    patience: PositiveInt = 20
    disc_acc_band: tuple[float, float] = (0.45, 0.55)
    disc_band_dwell: PositiveInt = 5
    warmup_iterations: int = Field(default=0, ge=0)
    rollout_passengers_per_iter: PositiveInt = 256
    max_iterations: PositiveInt = 200
    conditioning_mode: ConditioningMode = ConditioningMode.GROUP
    value_coef: float = Field(default=0.5, ge=0.0)
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    hidden_dims: tuple[PositiveInt, ...] = DEFAULT_HIDDEN
    bc_learning_rate: float = Field(default=1e-3, ge=0.0)
    bc_max_epochs: PositiveInt = 200
    bc_conditioning: ConditioningMode = ConditioningMode.RAW
    rollout_chunk: PositiveInt = 64

    @model_validator(mode='after')
    def _check_band(self) -> 'TrainConfig':
        lo, hi = self.disc_acc_band
        if not 0.0 <= lo <= hi <= 1.0:
            msg = f'disc_acc_band must satisfy 0 <= lo <= hi <= 1, got {self.disc_acc_band}'
            raise ValueError(msg)
        return self

    @property
    def effective_disc_learning_rate(self) -> float:
        """Discriminator learning rate, the policy rate when unset."""
        return self.learning_rate if self.disc_learning_rate is None else self.disc_learning_rate

    def for_model(self, model: ModelName) -> 'TrainConfig':
        """Copy with the conditioning mode the model requires."""
        return self.model_copy(update={'conditioning_mode': model.conditioning(self)})
