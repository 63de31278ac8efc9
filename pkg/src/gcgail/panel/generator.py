"""Synthetic smart-card population with a known adoption model.

Each passenger commutes between a home and a work station on a line network. Three latent traits drive
what the feature extractor later observes: flexibility scales the day-to-day spread of departure
times, inconvenience sets how far the habitual tap-out sits from the discount window, and distance sets
the trip length. A logistic propensity over the latents decides adoption, a geometric hazard decides
when, and the archetype mixtures decide the band and whether the passenger later reverts.
"""

import math
from datetime import date

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from gcgail.errors import ConfigError
from gcgail.panel.types import (
    DISCOUNT_RATE,
    DISCOUNT_WINDOW,
    EARLY_MORNING_BAND,
    FIRST_MONTH,
    LAST_MONTH,
    MORNING_PEAK_BAND,
    TRIP_COLUMNS,
    AdopterType,
    PassengerProfile,
)

# share of discount stations in the reference network (29 of 98)
DISCOUNT_STATION_SHARE = 29 / 98
# standard-normal quartile boundaries
_Q1, _Q3 = -0.6744897501960817, 0.6744897501960817
_MIXTURE_TOLERANCE = 1e-9
_LATENT_PHASE, _BEHAVIOUR_PHASE = 0, 1


def default_discount_stations(n_stations: int) -> frozenset[int]:
    """Central contiguous block of ``ceil(29/98 * n_stations)`` stations."""
    size = math.ceil(DISCOUNT_STATION_SHARE * n_stations)
    start = (n_stations - size) // 2
    return frozenset(range(start, start + size))


def _check_mixture(weights: dict[str, float], allowed: set[str], name: str) -> None:
    unknown = set(weights) - allowed
    if unknown:
        msg = f'{name} has unknown entries {sorted(unknown)}; expected {sorted(allowed)}'
        raise ConfigError(msg)
    if any(w < 0.0 for w in weights.values()) or abs(sum(weights.values()) - 1.0) > _MIXTURE_TOLERANCE:
        msg = f'{name} weights must be non-negative and sum to 1, got {weights}'
        raise ConfigError(msg)


class GeneratorConfig(BaseModel):
    """Parameters of the synthetic population.

    The propensity model is
    ``logit(p) = beta_0 + beta_flex*flex + beta_con*con + beta_dis*dis + beta_group*k`` where ``k``
    counts the traits falling in their most responsive quartile (flexibility 3, inconvenience 2,
    distance 2).
    """

    model_config = ConfigDict(frozen=True, extra='forbid')

    n_passengers: int = Field(default=2000, ge=1)
    n_stations: int = Field(default=20, ge=4)
    discount_stations: frozenset[int] | None = None
    promotion_start: date = date(2014, 9, 1)
    beta_0: float = -1.0
    beta_flex: float = 0.5
    beta_con: float = -0.8
    beta_dis: float = -0.3
    beta_group: float = 0.8
    adoption_hazard: float = Field(default=0.35, gt=0.0, le=1.0)
    band_mixture: dict[str, float] = Field(default_factory=lambda: {'early_morning': 0.3, 'morning_peak': 0.7})
    persistence_mixture: dict[str, float] = Field(default_factory=lambda: {'sustained': 0.75, 'attrition': 0.25})
    compliance: float = Field(default=0.9, ge=0.0, le=1.0)
    trial_rate: float = Field(default=0.02, ge=0.0, le=1.0)
    active_days_per_month: int = Field(default=8, ge=1, le=23)
    tap_out_sigma: float = Field(default=4.0, gt=0.0)

    @model_validator(mode='after')
    def _check(self) -> 'GeneratorConfig':
        _check_mixture(self.band_mixture, {'early_morning', 'morning_peak'}, 'band_mixture')
        _check_mixture(self.persistence_mixture, {'sustained', 'attrition'}, 'persistence_mixture')
        if self.discount_stations is not None and not all(0 <= s < self.n_stations for s in self.discount_stations):
            msg = f'discount_stations must lie in 0..{self.n_stations - 1}'
            raise ConfigError(msg)
        return self

    @property
    def discount_set(self) -> frozenset[int]:
        """Configured discount stations, or the default central block."""
        if self.discount_stations is not None:
            return self.discount_stations
        return default_discount_stations(self.n_stations)


def _month_start(start: date, offset: int) -> pd.Timestamp:
    return pd.Timestamp(start.year, start.month, 1) + pd.DateOffset(months=offset)


def panel_weekdays(promotion_start: date) -> dict[int, pd.DatetimeIndex]:
    """Weekdays of every panel month keyed by month index."""
    result = {}
    for m in range(FIRST_MONTH, LAST_MONTH + 1):
        first = _month_start(promotion_start, m)
        result[m] = pd.bdate_range(first, first + pd.offsets.MonthEnd(0))
    return result


def _squash(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-1.7 * z))


def _responsive_count(flex: float, con: float, dis: float) -> int:
    return int(0.0 < flex <= _Q3) + int(_Q1 < con <= 0.0) + int(_Q1 < dis <= 0.0)


class _Passenger(BaseModel):
    """Sampled latent quantities that drive the daily trips."""

    model_config = ConfigDict(frozen=True)

    profile: PassengerProfile
    early_band: bool
    habitual_tap_out: float
    tap_out_spread: float
    trip_minutes: float
    distance: int


def _sample_passenger(pid: int, cfg: GeneratorConfig, seed: int) -> _Passenger:
    rng = np.random.default_rng([seed, pid, _LATENT_PHASE])
    flex, con, dis = (float(v) for v in rng.standard_normal(3))
    n = cfg.n_stations

    centre = (n - 1) / 2.0
    work = int(np.clip(round(rng.normal(centre, n / 6.0)), 0, n - 1))
    distance = 1 + int((n / 2.0 - 1.0) * _squash(dis))
    direction = 1 if rng.random() < 0.5 else -1  # noqa: PLR2004
    if not 0 <= work + direction * distance < n:
        direction = -direction
    home = int(np.clip(work + direction * distance, 0, n - 1))
    if home == work:
        home = work + 1 if work + 1 < n else work - 1
    distance = abs(home - work)

    early_band = rng.random() < cfg.band_mixture.get('early_morning', 0.0)
    shift = 5.0 + 50.0 * _squash(con)
    habitual = EARLY_MORNING_BAND[1] - shift if early_band else MORNING_PEAK_BAND[0] + shift
    spread = cfg.tap_out_sigma * math.exp(0.6 * flex)
    trip_minutes = 6.0 + 3.0 * distance + float(rng.uniform(0.0, 3.0))

    logit_p = (cfg.beta_0 + cfg.beta_flex * flex + cfg.beta_con * con + cfg.beta_dis * dis
               + cfg.beta_group * _responsive_count(flex, con, dis))
    propensity = 1.0 / (1.0 + math.exp(-logit_p))
    adopts = rng.random() < propensity
    hazard = min(0.95, cfg.adoption_hazard * (0.5 + propensity))
    adoption_month = int(min(rng.geometric(hazard) - 1, LAST_MONTH - 1))
    attrition_draw = rng.random()
    attrition_at = int(rng.integers(adoption_month + 2, LAST_MONTH + 1)) if adoption_month + 2 <= LAST_MONTH else None

    archetype: frozenset[AdopterType] = frozenset()
    adoption: int | None = None
    attrition: int | None = None
    if adopts:
        adoption = adoption_month
        types = {AdopterType.EARLY if adoption <= 1 else AdopterType.LATE,
                 AdopterType.EARLY_MORNING if early_band else AdopterType.MORNING_PEAK}
        if attrition_at is not None and attrition_draw < cfg.persistence_mixture.get('attrition', 0.0):
            attrition = attrition_at
            types.add(AdopterType.ATTRITION)
        else:
            types.add(AdopterType.SUSTAINED)
        archetype = frozenset(types)

    profile = PassengerProfile(passenger_id=pid, home_station=home, work_station=work,
                               latent_flex=flex, latent_con=con, latent_dis=dis,
                               archetype=archetype, adoption_month=adoption, attrition_month=attrition)
    return _Passenger(profile=profile, early_band=early_band, habitual_tap_out=habitual,
                      tap_out_spread=spread, trip_minutes=trip_minutes, distance=distance)


def _off_peak_months(passenger: _Passenger, rng: np.random.Generator, trial_rate: float) -> set[int]:
    """Months in which the passenger aims for the discount window."""
    profile = passenger.profile
    if profile.adoption_month is not None:
        end = profile.attrition_month if profile.attrition_month is not None else LAST_MONTH + 1
        return set(range(profile.adoption_month, end))
    trials: set[int] = set()
    for m in range(LAST_MONTH + 1):
        if rng.random() < trial_rate and m - 1 not in trials:
            trials.add(m)
    return trials


def _passenger_trips(passenger: _Passenger,
                     cfg: GeneratorConfig,
                     seed: int,
                     weekdays: dict[int, pd.DatetimeIndex]) -> pd.DataFrame:
    profile = passenger.profile
    rng = np.random.default_rng([seed, profile.passenger_id, _BEHAVIOUR_PHASE])
    shifted = _off_peak_months(passenger, rng, cfg.trial_rate)
    band = EARLY_MORNING_BAND if passenger.early_band else MORNING_PEAK_BAND
    fare = round(4.0 + 0.8 * passenger.distance, 2)
    discount_stop = profile.work_station in cfg.discount_set

    frames = []
    for m in range(FIRST_MONTH, LAST_MONTH + 1):
        days = weekdays[m]
        n_days = min(cfg.active_days_per_month, len(days))
        chosen = np.sort(rng.choice(len(days), size=n_days, replace=False))
        habitual = np.clip(passenger.habitual_tap_out + rng.normal(0.0, passenger.tap_out_spread, n_days),
                           band[0], band[1] - 0.5)
        comply = rng.random(n_days) < cfg.compliance if m in shifted else np.zeros(n_days, dtype=bool)
        if passenger.early_band:
            target = DISCOUNT_WINDOW[0] + rng.uniform(0.0, 20.0, n_days)
        else:
            target = DISCOUNT_WINDOW[1] - rng.uniform(0.5, 20.0, n_days)
        tout = np.round(np.where(comply, target, habitual), 2)
        duration = np.maximum(2.0, passenger.trip_minutes + rng.normal(0.0, 1.0, n_days))
        tin = np.round(tout - duration, 2)
        evening_in = np.round(np.clip(rng.normal(1050.0, 20.0, n_days), 960.0, 1140.0), 2)
        evening_out = np.round(evening_in + np.maximum(2.0, passenger.trip_minutes + rng.normal(0.0, 1.0, n_days)), 2)
        launched = np.asarray(days[chosen] >= pd.Timestamp(cfg.promotion_start))
        disc = (tout >= DISCOUNT_WINDOW[0]) & (tout < DISCOUNT_WINDOW[1]) & discount_stop & launched
        dates = days[chosen].strftime('%Y-%m-%d')
        frames.append(pd.DataFrame({'pid': profile.passenger_id, 'date': dates, 'tin': tin, 'tout': tout,
                                    'orig': profile.home_station, 'dest': profile.work_station,
                                    'fare': fare, 'disc': disc.astype(int)}))
        frames.append(pd.DataFrame({'pid': profile.passenger_id, 'date': dates, 'tin': evening_in,
                                    'tout': evening_out, 'orig': profile.work_station,
                                    'dest': profile.home_station, 'fare': fare, 'disc': 0}))
    return pd.concat(frames, ignore_index=True)


def synthesize_population(cfg: GeneratorConfig, seed: int) -> tuple[pd.DataFrame, list[PassengerProfile]]:
    """Generate the trip table and ground-truth profiles.

    Every passenger draws from its own random streams seeded by ``(seed, passenger_id, phase)``, so
    output does not depend on generation order.

    Args:
        cfg: Population parameters.
        seed: Master seed.

    Returns:
        Trips sorted by passenger, date and tap-in, and profiles sorted by passenger id. Discounted
        trips carry the deducted fare in the ``disc`` flag only; ``fare`` is the full fare.
    """
    weekdays = panel_weekdays(cfg.promotion_start)
    passengers = [_sample_passenger(pid, cfg, seed) for pid in range(cfg.n_passengers)]
    trips = pd.concat([_passenger_trips(p, cfg, seed, weekdays) for p in passengers], ignore_index=True)
    trips = trips.sort_values(['pid', 'date', 'tin'], kind='mergesort').reset_index(drop=True)
    trips = trips[list(TRIP_COLUMNS)]
    profiles = [p.profile for p in passengers]
    adopters = sum(1 for p in profiles if p.archetype)
    logger.info('Population synthesized', passengers=len(profiles), adopters=adopters, trips=len(trips),
                discount_stations=sorted(cfg.discount_set), discount_rate=DISCOUNT_RATE, seed=seed)
    return trips, profiles
