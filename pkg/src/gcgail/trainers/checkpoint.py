"""Run artifacts: the JSON checkpoint and the CSV training log."""

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import pandas as pd
from pydantic import BaseModel, ValidationError

from gcgail.errors import CompatibilityError, DataValidationError
from gcgail.mdp import ConditioningMode, FeatureNormalizer
from gcgail.network import NetworkState, network_from_dict, network_to_dict
from gcgail.trainers.bc import BcResult
from gcgail.trainers.config import ModelName, TrainConfig
from gcgail.trainers.gail import GailResult
from gcgail.trainers.policy import PolicyModel
from gcgail.utils.typing import dumps

CHECKPOINT_FILE = 'checkpoint.json'
TRAIN_LOG_FILE = 'train_log.csv'


@dataclass(frozen=True)
class Checkpoint:
    """Trained networks with everything needed to reuse them."""

    model: ModelName
    cfg: TrainConfig
    normalizer: FeatureNormalizer
    policy: NetworkState
    value: NetworkState | None
    discriminator: NetworkState | None
    scenario: str
    seed: int

    @property
    def conditioning(self) -> ConditioningMode:
        """Conditioning of every stored network."""
        return self.cfg.conditioning_mode

    @property
    def policy_model(self) -> PolicyModel:
        """Policy ready for prediction."""
        return PolicyModel(params=self.policy.params, normalizer=self.normalizer, mode=self.conditioning)

    @classmethod
    def from_gail(cls, model: ModelName, result: GailResult, scenario: str, seed: int) -> 'Checkpoint':
        """Checkpoint of the best GAIL-family state."""
        return cls(model=model, cfg=result.cfg, normalizer=result.normalizer, policy=result.best.policy,
                   value=result.best.value, discriminator=result.best.discriminator, scenario=scenario, seed=seed)

    @classmethod
    def from_bc(cls, result: BcResult, scenario: str, seed: int) -> 'Checkpoint':
        """Checkpoint of a behaviour cloning policy."""
        return cls(model=ModelName.BC, cfg=result.cfg, normalizer=result.normalizer, policy=result.state,
                   value=None, discriminator=None, scenario=scenario, seed=seed)


def _network(state: NetworkState | None) -> dict[str, Any] | None:
    return None if state is None else network_to_dict(state.params, state.adam)


def _restore(doc: dict[str, Any] | None) -> NetworkState | None:
    if doc is None:
        return None
    params, adam = network_from_dict(doc)
    if adam is None:
        msg = 'Stored network lacks its optimizer state'
        raise DataValidationError(msg)
    return NetworkState(params=params, adam=adam)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> Path:
    """Write ``{model, conditioning, cfg, normalizer, networks, scenario, seed}`` as JSON."""
    doc = {'model': checkpoint.model,
           'conditioning': checkpoint.conditioning,
           'cfg': checkpoint.cfg,
           'normalizer': checkpoint.normalizer,
           'networks': {'policy': _network(checkpoint.policy),
                        'value': _network(checkpoint.value),
                        'discriminator': _network(checkpoint.discriminator)},
           'scenario': checkpoint.scenario,
           'seed': checkpoint.seed}
    path.write_text(dumps(doc) + '\n', encoding='utf-8')
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint written by `save_checkpoint`.

    Raises:
        FileNotFoundError: No file at `path`.
        DataValidationError: The document is malformed.
        CompatibilityError: The stored conditioning does not match the stored networks.
    """
    if not path.is_file():
        msg = f'Checkpoint not found: {path}'
        raise FileNotFoundError(msg)
    try:
        doc = json.loads(path.read_text(encoding='utf-8'))
        cfg = TrainConfig.model_validate(doc['cfg'])
        checkpoint = Checkpoint(model=ModelName(doc['model']), cfg=cfg,
                                normalizer=FeatureNormalizer.model_validate(doc['normalizer']),
                                policy=_restore(doc['networks']['policy']),
                                value=_restore(doc['networks'].get('value')),
                                discriminator=_restore(doc['networks'].get('discriminator')),
                                scenario=str(doc['scenario']), seed=int(doc['seed']))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as e:
        msg = f'Malformed checkpoint {path}: {e}'
        raise DataValidationError(msg) from e
    if ConditioningMode(doc['conditioning']) is not cfg.conditioning_mode:
        msg = f'Checkpoint {path} records {doc["conditioning"]} but its config says {cfg.conditioning_mode.value}'
        raise CompatibilityError(msg)
    if checkpoint.policy.params.spec.input_dim != cfg.conditioning_mode.input_dim:
        msg = f'Policy input width {checkpoint.policy.params.spec.input_dim} does not fit {cfg.conditioning_mode.value}'
        raise CompatibilityError(msg)
    return checkpoint


def write_training_log(path: Path, rows: Sequence[BaseModel], header: Mapping[str, Any]) -> Path:
    """CSV of log rows preceded by ``# key=value`` lines."""
    lines = [f'# {key}={dumps(value)}' for key, value in header.items()]
    frame = pd.DataFrame([row.model_dump() for row in rows])
    with path.open('w', encoding='utf-8', newline='') as handle:
        handle.write('\n'.join(lines) + '\n' if lines else '')
        frame.to_csv(handle, index=False, lineterminator='\n')
    return path


def read_training_log(path: Path) -> tuple[dict[str, Any], pd.DataFrame]:
    """Header mapping and rows of a training log."""
    header = {}
    with path.open(encoding='utf-8') as handle:
        for line in handle:
            if not line.startswith('#'):
                break
            key, _, value = line[1:].strip().partition('=')
            header[key] = json.loads(value)
    return header, pd.read_csv(path, comment='#')
