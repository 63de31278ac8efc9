"""Record types of the smart-card panel."""

import datetime as dt
import math
from collections.abc import Iterable
from enum import Enum

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    ValidationError,
    ValidationInfo,
    field_serializer,
    model_validator,
)

from gcgail.errors import DataValidationError
from gcgail.mdp import STATE_DIM, ActionLabel, ConditionVector, StateVector

# Time windows in minutes after midnight, measured at tap-out.
DISCOUNT_WINDOW = (435.0, 495.0)  # 7:15-8:15
EARLY_MORNING_BAND = (375.0, 435.0)  # 6:15-7:15
MORNING_PEAK_BAND = (495.0, 555.0)  # 8:15-9:15
MORNING_CUTOFF = 720.0  # morning trips tap in before noon
DISCOUNT_RATE = 0.25

FIRST_MONTH = -2
LAST_MONTH = 13
PANEL_MONTHS = tuple(range(FIRST_MONTH, LAST_MONTH + 1))
PRE_PROMOTION_MONTHS = (-2, -1)

TRIP_COLUMNS = ('pid', 'date', 'tin', 'tout', 'orig', 'dest', 'fare', 'disc')


def in_window(minutes: float, window: tuple[float, float]) -> bool:
    """Half-open interval membership ``[lo, hi)``."""
    return window[0] <= minutes < window[1]


def shift_to_window(tap_out: np.ndarray | float) -> np.ndarray | float:
    """Minutes a tap-out must move to fall inside the discount window; 0 when already eligible."""
    lo, hi = DISCOUNT_WINDOW
    out = np.asarray(tap_out, dtype=np.float64)
    shift = np.where(out < lo, lo - out, np.where(out >= hi, out - hi, 0.0))
    return float(shift) if np.ndim(tap_out) == 0 else shift


class AdopterType(str, Enum):
    """Adopter archetypes; a non-adopter has none of them."""

    EARLY = 'early'
    LATE = 'late'
    EARLY_MORNING = 'early_morning'
    MORNING_PEAK = 'morning_peak'
    ATTRITION = 'attrition'
    SUSTAINED = 'sustained'


def adopter_class(types: Iterable[AdopterType]) -> str:
    """'adopter' when any archetype is present, else 'non_adopter'."""
    return 'adopter' if set(types) else 'non_adopter'


TRIP_FIELDS = {'pid': 'passenger_id', 'date': 'date', 'tin': 'tap_in_minutes', 'tout': 'tap_out_minutes',
               'orig': 'origin_station', 'dest': 'destination_station', 'fare': 'fare', 'disc': 'discount_applied'}
_VALIDATION_CHUNK = 100_000


class TripRecord(BaseModel):
    """One smart-card trip.

    The discount checks that need the promotion (station set and launch date) run only when
    validation is given a context with ``discount_stations`` and ``promotion_start``.
    """

    model_config = ConfigDict(frozen=True)

    passenger_id: int
    date: dt.date
    tap_in_minutes: float
    tap_out_minutes: float
    origin_station: int = Field(ge=0)
    destination_station: int = Field(ge=0)
    fare: float = Field(gt=0)
    discount_applied: bool = False

    @model_validator(mode='after')
    def _check(self, info: ValidationInfo) -> 'TripRecord':
        if self.tap_in_minutes >= self.tap_out_minutes:
            msg = 'tap_in must be earlier than tap_out'
            raise ValueError(msg)
        if not self.discount_applied:
            return self
        if not in_window(self.tap_out_minutes, DISCOUNT_WINDOW):
            msg = 'Discount applied outside the discount window'
            raise ValueError(msg)
        if self.date.weekday() >= 5:  # noqa: PLR2004
            msg = 'Discount applied on a weekend'
            raise ValueError(msg)
        context = info.context or {}
        stations = context.get('discount_stations')
        if stations is not None and self.destination_station not in stations:
            msg = f'Discount applied at station {self.destination_station}, which is not a discount station'
            raise ValueError(msg)
        start = context.get('promotion_start')
        if start is not None and self.date < start:
            msg = f'Discount applied on {self.date}, before the promotion started on {start}'
            raise ValueError(msg)
        return self


def validate_trips(trips: pd.DataFrame, *, discount_stations: frozenset[int], promotion_start: dt.date) -> None:
    """Check every row of a trip table against the `TripRecord` invariants.

    Raises:
        DataValidationError: At least one row is invalid; the message names the first.
    """
    adapter = TypeAdapter(list[TripRecord])
    context = {'discount_stations': discount_stations, 'promotion_start': promotion_start}
    renamed = trips[list(TRIP_COLUMNS)].rename(columns=TRIP_FIELDS)
    for start in range(0, len(renamed), _VALIDATION_CHUNK):
        chunk = renamed.iloc[start:start + _VALIDATION_CHUNK]
        try:
            adapter.validate_python(chunk.to_dict('records'), context=context)
        except ValidationError as e:
            first = e.errors()[0]
            row = start + int(first['loc'][0])
            msg = f'Invalid trip at row {row} ({e.error_count()} bad in this chunk): {first["msg"]}'
            raise DataValidationError(msg) from e


class PassengerProfile(BaseModel):
    """Generator ground truth for one passenger."""

    model_config = ConfigDict(frozen=True)

    passenger_id: int
    home_station: int
    work_station: int
    latent_flex: float
    latent_con: float
    latent_dis: float
    archetype: frozenset[AdopterType] = frozenset()
    adoption_month: int | None = None
    attrition_month: int | None = None

    @model_validator(mode='after')
    def _check(self) -> 'PassengerProfile':
        if (self.adoption_month is not None) != bool(self.archetype):
            msg = 'adoption_month must be set exactly for adopters'
            raise ValueError(msg)
        if self.attrition_month is not None and (self.adoption_month is None
                                                 or self.attrition_month <= self.adoption_month):
            msg = 'attrition_month must come after adoption_month'
            raise ValueError(msg)
        return self

    @field_serializer('archetype')
    def _serialize_archetype(self, value: frozenset[AdopterType]) -> list[str]:
        return sorted(item.value for item in value)


class MonthlyObservation(BaseModel):
    """State and action of one passenger-month."""

    model_config = ConfigDict(frozen=True)

    passenger_id: int
    month_index: int
    state: StateVector
    action: ActionLabel


class ExpertTrajectory(BaseModel):
    """A passenger's ordered panel with its condition vector."""

    model_config = ConfigDict(frozen=True)

    passenger_id: int
    observations: tuple[MonthlyObservation, ...]
    condition: ConditionVector

    @model_validator(mode='after')
    def _check(self) -> 'ExpertTrajectory':
        months = [obs.month_index for obs in self.observations]
        if not months:
            msg = 'A trajectory needs at least one observation'
            raise ValueError(msg)
        if months != list(range(months[0], months[0] + len(months))):
            msg = f'Observations of passenger {self.passenger_id} are not consecutive months: {months}'
            raise ValueError(msg)
        return self

    def __len__(self) -> int:
        """Number of months."""
        return len(self.observations)

    @property
    def home_station(self) -> int:
        """Inferred home station."""
        return self.observations[0].state.l_home

    @property
    def work_station(self) -> int:
        """Inferred work station."""
        return self.observations[0].state.l_work

    def states(self) -> np.ndarray:
        """``[T, 11]`` state matrix."""
        return np.stack([obs.state.to_array() for obs in self.observations]).reshape(-1, STATE_DIM)

    def actions(self) -> np.ndarray:
        """``[T]`` integer actions."""
        return np.array([int(obs.action) for obs in self.observations], dtype=np.int64)

    def modes_by_month(self) -> dict[int, int]:
        """Monthly mode label keyed by month index."""
        return {obs.month_index: int(obs.action) for obs in self.observations}

    def tap_out_by_month(self) -> dict[int, float]:
        """Mean morning tap-out per calendar month, recovered from the one-month lag of the states."""
        result = {}
        for obs in self.observations[1:]:
            result[obs.month_index - 1] = obs.state.e_t
        return result


def logit(p: float) -> float:
    """Log-odds of a probability."""
    return math.log(p / (1.0 - p))
