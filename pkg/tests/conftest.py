"""Shared fixtures: small synthetic populations, hand-built panels and fast training settings."""  # noqa: INP001

from collections.abc import Callable, Sequence
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from gcgail.mdp import ActionLabel, ConditioningMode, ConditionVector, FeatureNormalizer, StateVector
from gcgail.network import Layer, MlpSpec, init_params
from gcgail.panel.features import PromotionConfig, extract_features
from gcgail.panel.generator import GeneratorConfig, synthesize_population
from gcgail.panel.types import FIRST_MONTH, ExpertTrajectory, MonthlyObservation, PassengerProfile
from gcgail.trainers.config import TrainConfig
from gcgail.trainers.policy import PolicyModel, stack_trajectories

TrajectoryFactory = Callable[..., ExpertTrajectory]


def build_trajectory(pid: int,
                     actions: Sequence[int],
                     *,
                     groups: tuple[int, int, int] = (1, 1, 1),
                     raw: tuple[float, float, float] = (5.0, 10.0, 20.0),
                     home: int = 0,
                     work: int = 5,
                     w_u: int = 1,
                     tap_in: float = 470.0,
                     tap_out: float = 500.0) -> ExpertTrajectory:
    """Panel whose mode history follows `actions`, starting at month -2."""
    observations = []
    for k, action in enumerate(actions):
        lambda_t = actions[max(k - 1, 0)]
        lambda_prev = actions[max(k - 2, 0)]
        state = StateVector(l_home=home, l_work=work, d_t=tap_in, e_t=tap_out, c_t=8.0, b_t=5.0,
                            m_p_t=FIRST_MONTH + k, m_s_t=0.0, w_u=w_u, lambda_t=lambda_t, lambda_prev=lambda_prev)
        observations.append(MonthlyObservation(passenger_id=pid, month_index=FIRST_MONTH + k, state=state,
                                               action=ActionLabel(action)))
    condition = ConditionVector(flex_raw=raw[0], con_raw=raw[1], dis_raw=raw[2],
                                g_flex=groups[0], g_con=groups[1], g_dis=groups[2])
    return ExpertTrajectory(passenger_id=pid, observations=tuple(observations), condition=condition)


@pytest.fixture
def make_trajectory() -> TrajectoryFactory:
    """Factory for hand-built trajectories."""
    return build_trajectory


@pytest.fixture(scope='session')
def small_generator_config() -> GeneratorConfig:
    """A population small enough for unit tests."""
    return GeneratorConfig(n_passengers=80, n_stations=12)


@pytest.fixture(scope='session')
def small_population(small_generator_config: GeneratorConfig) -> tuple[pd.DataFrame, list[PassengerProfile]]:
    """Trips and profiles of the small population."""
    return synthesize_population(small_generator_config, seed=3)


@pytest.fixture(scope='session')
def small_trajectories(small_generator_config: GeneratorConfig,
                       small_population: tuple[pd.DataFrame, list[PassengerProfile]]) -> list[ExpertTrajectory]:
    """Expert trajectories extracted from the small population."""
    trips, profiles = small_population
    promotion = PromotionConfig(start_date=small_generator_config.promotion_start,
                                discount_stations=small_generator_config.discount_set)
    return extract_features(trips, promotion, profiles)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    """Narrow networks, short updates and no warm-up."""
    return TrainConfig(hidden_dims=(16, 16), batch_size=64, ppo_epochs_per_update=4, rollout_passengers_per_iter=32,
                       max_iterations=40, warmup_iterations=0, learning_rate=3e-3, disc_learning_rate=2e-2,
                       bc_learning_rate=1e-2, bc_max_epochs=60, validation_fraction=0.2)


def fixed_policy(trajectories: Sequence[ExpertTrajectory],
                 mode: ConditioningMode,
                 head_bias: tuple[float, float] = (0.0, 0.0)) -> PolicyModel:
    """Policy whose logits equal `head_bias` for every input."""
    arrays = stack_trajectories(trajectories)
    normalizer = FeatureNormalizer.fit(arrays.states, arrays.cond_raw)
    params = init_params(MlpSpec.policy(mode.input_dim, hidden_dims=(8,)), 0)
    head = Layer(w=np.zeros_like(params.layers[-1].w), b=np.asarray(head_bias, dtype=np.float64))
    return PolicyModel(params=replace(params, layers=(*params.layers[:-1], head)), normalizer=normalizer, mode=mode)
