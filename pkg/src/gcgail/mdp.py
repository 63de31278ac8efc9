"""Monthly travel-behaviour MDP: state vector, binary action, deterministic transition and input encoding.

A state at month m describes what a passenger knows when month m begins: the trip statistics of the
most recent completed month, the two latest monthly modes, months since the promotion launch and the
fixed home/work context. The action is the passenger's mode for month m (1 = off-peak). The next state
takes its statistics from the passenger's observed panel and its mode history from the action taken,
so replaying the expert actions reproduces the stored panel exactly.
"""

from collections.abc import Sequence
from enum import Enum, IntEnum
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, model_validator

from gcgail.errors import DataValidationError, EpisodeTerminated, NotFittedError, ShapeError

STATE_FIELDS = ('l_home', 'l_work', 'd_t', 'e_t', 'c_t', 'b_t', 'm_p_t', 'm_s_t', 'w_u', 'lambda_t', 'lambda_prev')
STATE_DIM = len(STATE_FIELDS)
IDX = {name: k for k, name in enumerate(STATE_FIELDS)}
CONTINUOUS_IDX = tuple(IDX[name] for name in ('l_home', 'l_work', 'd_t', 'e_t', 'c_t', 'b_t', 'm_p_t', 'm_s_t'))
# carried over unchanged by the transition
STATIC_IDX = tuple(IDX[name] for name in ('l_home', 'l_work', 'w_u'))
N_GROUPS = 4
CLIP = 5.0


class ActionLabel(IntEnum):
    """Monthly departure-time mode."""

    PEAK = 0
    OFF_PEAK = 1


class ConditioningMode(str, Enum):
    """How passenger traits enter the network inputs."""

    UNCONDITIONED = 'unconditioned'
    RAW = 'raw'
    GROUP = 'group'

    @property
    def input_dim(self) -> int:
        """Encoded width: 11 state features plus 0, 3 or 3 one-hot blocks of 4."""
        return {ConditioningMode.UNCONDITIONED: STATE_DIM,
                ConditioningMode.RAW: STATE_DIM + 3,
                ConditioningMode.GROUP: STATE_DIM + 3 * N_GROUPS}[self]


class StateVector(BaseModel):
    """The eleven per-month state features."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    l_home: int = Field(ge=0)
    l_work: int = Field(ge=0)
    d_t: float
    e_t: float
    c_t: NonNegativeFloat
    b_t: NonNegativeFloat
    m_p_t: int
    m_s_t: NonNegativeFloat
    w_u: int = Field(ge=0, le=1)
    lambda_t: int = Field(ge=0, le=1)
    lambda_prev: int = Field(ge=0, le=1)

    @model_validator(mode='after')
    def _tap_order(self) -> 'StateVector':
        if self.d_t > self.e_t:
            msg = f'Mean tap-in {self.d_t} is later than mean tap-out {self.e_t}'
            raise ValueError(msg)
        return self

    def to_array(self) -> np.ndarray:
        """Features as a float64 vector in `STATE_FIELDS` order."""
        return np.array([float(getattr(self, name)) for name in STATE_FIELDS], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float] | np.ndarray) -> 'StateVector':
        """Build from a vector in `STATE_FIELDS` order."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (STATE_DIM,):
            msg = f'State vector must have {STATE_DIM} entries, got shape {values.shape}'
            raise ShapeError(msg)
        data: dict[str, Any] = dict(zip(STATE_FIELDS, values.tolist(), strict=True))
        for name in ('l_home', 'l_work', 'm_p_t', 'w_u', 'lambda_t', 'lambda_prev'):
            data[name] = round(data[name])
        return cls(**data)


class RawCondition(BaseModel):
    """Pre-promotion trait values before quartile grouping."""

    model_config = ConfigDict(frozen=True)

    flex_raw: float
    con_raw: float
    dis_raw: float

    def with_groups(self, g_flex: int, g_con: int, g_dis: int) -> 'ConditionVector':
        """Attach quartile labels."""
        return ConditionVector(flex_raw=self.flex_raw, con_raw=self.con_raw, dis_raw=self.dis_raw,
                               g_flex=g_flex, g_con=g_con, g_dis=g_dis)


class ConditionVector(RawCondition):
    """Trait values together with their quartile group labels."""

    g_flex: int = Field(ge=1, le=N_GROUPS)
    g_con: int = Field(ge=1, le=N_GROUPS)
    g_dis: int = Field(ge=1, le=N_GROUPS)

    @property
    def raw(self) -> np.ndarray:
        """(flex, con, dis) as a vector."""
        return np.array([self.flex_raw, self.con_raw, self.dis_raw], dtype=np.float64)

    @property
    def groups(self) -> np.ndarray:
        """(g_flex, g_con, g_dis) as an integer vector."""
        return np.array([self.g_flex, self.g_con, self.g_dis], dtype=np.int64)


def transition_array(states: np.ndarray, actions: np.ndarray, next_observed: np.ndarray) -> np.ndarray:
    """Vectorized transition for a batch of passengers.

    Args:
        states: ``[n, 11]`` current states.
        actions: ``[n]`` actions in {0, 1}.
        next_observed: ``[n, 11]`` stored states of the next month; only their trip statistics are used.

    Returns:
        ``[n, 11]`` next states.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    next_observed = np.atleast_2d(np.asarray(next_observed, dtype=np.float64))
    actions = np.atleast_1d(np.asarray(actions))
    if states.shape != next_observed.shape or states.shape[1] != STATE_DIM or actions.shape != (states.shape[0],):
        msg = f'Transition shapes disagree: {states.shape}, {actions.shape}, {next_observed.shape}'
        raise ShapeError(msg)
    if not np.isin(actions, (0, 1)).all():
        msg = 'Actions must be 0 or 1'
        raise DataValidationError(msg)
    nxt = next_observed.copy()
    nxt[:, STATIC_IDX] = states[:, STATIC_IDX]
    nxt[:, IDX['m_p_t']] = states[:, IDX['m_p_t']] + 1.0
    nxt[:, IDX['lambda_prev']] = states[:, IDX['lambda_t']]
    nxt[:, IDX['lambda_t']] = actions.astype(np.float64)
    return nxt


def transition(state: StateVector, action: ActionLabel | int, next_observation: Any | None) -> StateVector:  # noqa: ANN401
    """Advance one month.

    Args:
        state: Current state.
        action: Mode chosen for the current month.
        next_observation: The passenger's `MonthlyObservation` for month ``m_p_t + 1``, or None at the
            end of the panel.

    Returns:
        The next state.

    Raises:
        EpisodeTerminated: There is no next month.
        DataValidationError: The observation is not the next month.
    """
    if next_observation is None:
        msg = f'No observation after month {state.m_p_t}'
        raise EpisodeTerminated(msg)
    if next_observation.month_index != state.m_p_t + 1:
        msg = f'Expected month {state.m_p_t + 1}, got {next_observation.month_index}'
        raise DataValidationError(msg)
    nxt = transition_array(state.to_array(), np.array([int(action)]), next_observation.state.to_array())
    return StateVector.from_array(nxt[0])


class PanelEnv:
    """Replays one passenger's panel as an episodic environment."""

    def __init__(self, trajectory: Any) -> None:  # noqa: ANN401
        """Wrap an `ExpertTrajectory`."""
        self.trajectory = trajectory
        self._t = 0
        self._state: StateVector | None = None

    def reset(self) -> StateVector:
        """Start the episode at the first observed month."""
        self._t = 0
        self._state = self.trajectory.observations[0].state
        return self._state

    def step(self, action: ActionLabel | int) -> tuple[StateVector | None, bool]:
        """Apply an action; returns ``(next_state, done)`` with ``next_state`` None when done."""
        if self._state is None:
            msg = 'Call reset() before step()'
            raise NotFittedError(msg)
        observations = self.trajectory.observations
        nxt = observations[self._t + 1] if self._t + 1 < len(observations) else None
        try:
            self._state = transition(self._state, action, nxt)
        except EpisodeTerminated:
            self._state = None
            return None, True
        self._t += 1
        return self._state, False


class EncodedInput(BaseModel):
    """Network-ready feature vector."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: np.ndarray
    mode: ConditioningMode


def _zscore(values: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    safe = np.where(std > 0.0, std, 1.0)
    return np.where(std > 0.0, (values - mean) / safe, 0.0)


def one_hot_groups(groups: np.ndarray) -> np.ndarray:
    """``[n, 3]`` labels in 1..4 to ``[n, 12]`` concatenated one-hot blocks."""
    groups = np.atleast_2d(np.asarray(groups))
    if not np.isin(groups, np.arange(1, N_GROUPS + 1)).all():
        msg = f'Group labels must lie in 1..{N_GROUPS}'
        raise DataValidationError(msg)
    eye = np.eye(N_GROUPS)
    return np.concatenate([eye[groups[:, j].astype(np.int64) - 1] for j in range(groups.shape[1])], axis=1)


class FeatureNormalizer(BaseModel):
    """Z-score statistics fitted on training data and the encoder that uses them.

    Continuous state features and raw condition values are standardized; binary features pass
    through; zero-variance features map to 0; everything is clipped to [-5, 5].
    """

    state_mean: list[float] | None = None
    state_std: list[float] | None = None
    cond_mean: list[float] | None = None
    cond_std: list[float] | None = None

    @property
    def fitted(self) -> bool:
        """True once statistics are present."""
        return self.state_mean is not None

    @classmethod
    def fit(cls, states: np.ndarray, cond_raw: np.ndarray) -> 'FeatureNormalizer':
        """Fit on ``[n, 11]`` states and ``[n, 3]`` raw condition rows (one row per training step)."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        cond_raw = np.atleast_2d(np.asarray(cond_raw, dtype=np.float64))
        if states.shape[0] == 0:
            msg = 'Cannot fit a normalizer on zero rows'
            raise ShapeError(msg)
        return cls(state_mean=states.mean(axis=0).tolist(), state_std=states.std(axis=0).tolist(),
                   cond_mean=cond_raw.mean(axis=0).tolist(), cond_std=cond_raw.std(axis=0).tolist())

    def encode_arrays(self,
                      states: np.ndarray,
                      cond_raw: np.ndarray | None,
                      cond_groups: np.ndarray | None,
                      mode: ConditioningMode) -> np.ndarray:
        """Batched encoding.

        Args:
            states: ``[n, 11]`` raw states.
            cond_raw: ``[n, 3]`` raw condition values (needed for RAW).
            cond_groups: ``[n, 3]`` group labels (needed for GROUP).
            mode: Conditioning mode.

        Returns:
            ``[n, mode.input_dim]`` encoded rows.
        """
        if not self.fitted:
            msg = 'FeatureNormalizer used before fit()'
            raise NotFittedError(msg)
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != STATE_DIM:
            msg = f'States must have {STATE_DIM} columns, got {states.shape[1]}'
            raise ShapeError(msg)
        cols = list(CONTINUOUS_IDX)
        encoded = states.copy()
        encoded[:, cols] = _zscore(states[:, cols], np.asarray(self.state_mean)[cols], np.asarray(self.state_std)[cols])
        parts = [encoded]
        if mode is ConditioningMode.RAW:
            raw = np.atleast_2d(np.asarray(cond_raw, dtype=np.float64))
            parts.append(_zscore(raw, np.asarray(self.cond_mean), np.asarray(self.cond_std)))
        elif mode is ConditioningMode.GROUP:
            parts.append(one_hot_groups(cond_groups))
        out = np.clip(np.concatenate(parts, axis=1), -CLIP, CLIP)
        if not np.isfinite(out).all():
            msg = 'Encoded features contain non-finite values'
            raise DataValidationError(msg)
        return out

    def encode(self, state: StateVector, condition: ConditionVector, mode: ConditioningMode) -> EncodedInput:
        """Encode one state under the given conditioning mode."""
        features = self.encode_arrays(state.to_array(), condition.raw, condition.groups, mode)[0]
        return EncodedInput(features=features, mode=mode)


def action_one_hot(actions: np.ndarray, n_actions: int = 2) -> np.ndarray:
    """``[n]`` integer actions to ``[n, n_actions]`` one-hot rows."""
    return np.eye(n_actions)[np.asarray(actions, dtype=np.int64)]
