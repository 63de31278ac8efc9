"""Trip-table features: home/work inference, monthly modes, state statistics and condition traits."""

from collections.abc import Sequence
from datetime import date
from typing import NamedTuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict

from gcgail.errors import DataValidationError, InsufficientDataError
from gcgail.mdp import ActionLabel, RawCondition, StateVector
from gcgail.panel.types import (
    DISCOUNT_RATE,
    DISCOUNT_WINDOW,
    FIRST_MONTH,
    LAST_MONTH,
    MORNING_CUTOFF,
    MORNING_PEAK_BAND,
    PRE_PROMOTION_MONTHS,
    ExpertTrajectory,
    MonthlyObservation,
    PassengerProfile,
    shift_to_window,
    validate_trips,
)

N_QUARTILE_GROUPS = 4


class PromotionConfig(BaseModel):
    """Launch date of the promotion and the stations where it applies."""

    model_config = ConfigDict(frozen=True)

    start_date: date = date(2014, 9, 1)
    discount_stations: frozenset[int]


def month_index(dates: pd.Series, start: date) -> pd.Series:
    """Calendar months between each ISO date and the promotion launch month (launch month = 0)."""
    parsed = pd.to_datetime(dates)
    return (parsed.dt.year - start.year) * 12 + (parsed.dt.month - start.month)


def quartile_grouping(values: Sequence[float] | np.ndarray) -> list[int]:
    """Quartile labels 1..4.

    Boundaries are the 25th/50th/75th percentiles with linear interpolation. A value on a boundary
    takes the lower label, so identical values all get label 1.

    Raises:
        DataValidationError: Fewer than four values.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < N_QUARTILE_GROUPS:
        msg = f'Quartile grouping needs at least {N_QUARTILE_GROUPS} values, got {arr.size}'
        raise DataValidationError(msg)
    bounds = np.percentile(arr, [25.0, 50.0, 75.0], method='linear')
    return (np.searchsorted(bounds, arr, side='left') + 1).astype(int).tolist()


def _home_work_table(trips: pd.DataFrame) -> pd.DataFrame:
    """Home and work station per passenger from days with at least two trips."""
    ordered = trips.sort_values(['pid', 'date', 'tin'], kind='mergesort')
    per_day = ordered.groupby(['pid', 'date'], sort=True)
    counts = per_day['tin'].transform('size')
    multi = ordered[counts >= 2]  # noqa: PLR2004
    if multi.empty:
        return pd.DataFrame(columns=['home', 'work'])
    days = multi.groupby(['pid', 'date'], sort=True)
    first, last = days.first(), days.last()

    def modal(stations: pd.Series) -> pd.Series:
        counted = stations.rename('station').reset_index().groupby(['pid', 'station']).size().rename('n').reset_index()
        counted = counted.sort_values(['pid', 'n', 'station'], ascending=[True, False, True], kind='mergesort')
        return counted.groupby('pid')['station'].first()

    home = modal(pd.concat([first['orig'], last['dest']]))
    work = modal(pd.concat([first['dest'], last['orig']]))
    return pd.DataFrame({'home': home, 'work': work}).astype(int)


def infer_home_work(trips: pd.DataFrame) -> tuple[int, int]:
    """Home and work station of one passenger.

    Home is the modal station among first-trip origins and last-trip destinations, work the modal
    station among first-trip destinations and last-trip origins, over days with at least two trips.
    Ties go to the smallest station id.

    Raises:
        InsufficientDataError: No day with two or more trips.
    """
    if trips.empty:
        msg = 'Cannot infer home/work from an empty trip set'
        raise InsufficientDataError(msg)
    table = _home_work_table(trips)
    if table.empty:
        msg = 'No day with at least two trips'
        raise InsufficientDataError(msg)
    row = table.iloc[0]
    return int(row['home']), int(row['work'])


class ModeLabel(NamedTuple):
    """Monthly mode with the counts it was derived from."""

    action: ActionLabel
    off_peak: int
    peak: int
    no_data: bool = False


def mode_from_counts(off_peak: np.ndarray | int, peak: np.ndarray | int) -> np.ndarray | bool:
    """Off-peak month iff off-peak trips exceed half the peak trips."""
    return np.asarray(off_peak) > 0.5 * np.asarray(peak)


def _annotate_morning(trips: pd.DataFrame) -> pd.DataFrame:
    """Morning trips with the per-trip quantities the monthly statistics average."""
    morning = trips[trips['tin'] < MORNING_CUTOFF].copy()
    disc = morning['disc'].astype(bool)
    morning['deducted'] = np.where(disc, morning['fare'] * (1.0 - DISCOUNT_RATE), morning['fare'])
    morning['shift'] = shift_to_window(morning['tout'].to_numpy())
    morning['saving'] = np.where(disc, morning['fare'] * DISCOUNT_RATE, np.nan)
    morning['duration'] = morning['tout'] - morning['tin']
    morning['off'] = (morning['tout'] >= DISCOUNT_WINDOW[0]) & (morning['tout'] < DISCOUNT_WINDOW[1])
    morning['peak'] = (morning['tout'] >= MORNING_PEAK_BAND[0]) & (morning['tout'] < MORNING_PEAK_BAND[1])
    return morning


def monthly_mode_label(trips: pd.DataFrame) -> ModeLabel:
    """Mode label of one passenger-month; label 0 flagged ``no_data`` when there is no morning trip."""
    morning = _annotate_morning(trips)
    if morning.empty:
        return ModeLabel(action=ActionLabel.PEAK, off_peak=0, peak=0, no_data=True)
    off, peak = int(morning['off'].sum()), int(morning['peak'].sum())
    return ModeLabel(action=ActionLabel(int(mode_from_counts(off, peak))), off_peak=off, peak=peak)


def month_statistics(trips: pd.DataFrame) -> dict[str, float]:
    """Mean tap-in, tap-out, deducted fare, shift time and saving over one month's morning trips."""
    morning = _annotate_morning(trips)
    if morning.empty:
        msg = 'No morning trips in this month'
        raise InsufficientDataError(msg)
    saving = morning['saving'].mean()
    return {'d_t': float(morning['tin'].mean()),
            'e_t': float(morning['tout'].mean()),
            'c_t': float(morning['deducted'].mean()),
            'b_t': float(morning['shift'].mean()),
            'm_s_t': 0.0 if np.isnan(saving) else float(saving)}


def compute_condition_features(trips: pd.DataFrame) -> RawCondition:
    """Flexibility, inconvenience and distance traits from the two pre-promotion months.

    Args:
        trips: The passenger's trips restricted to months -2 and -1.

    Raises:
        InsufficientDataError: No pre-promotion trips.
    """
    if trips.empty:
        msg = 'No pre-promotion trips'
        raise InsufficientDataError(msg)
    weekday = trips[pd.to_datetime(trips['date']).dt.dayofweek < 5]  # noqa: PLR2004
    first_tap_in = weekday.sort_values(['date', 'tin'], kind='mergesort').groupby('date')['tin'].first()
    morning = _annotate_morning(weekday)
    if first_tap_in.empty or morning.empty:
        msg = 'No weekday morning trips in the pre-promotion months'
        raise InsufficientDataError(msg)
    return RawCondition(flex_raw=float(np.std(first_tap_in.to_numpy())),
                        con_raw=float(morning['shift'].mean()),
                        dis_raw=float(morning['duration'].mean()))


def _monthly_table(trips: pd.DataFrame) -> pd.DataFrame:
    morning = _annotate_morning(trips)
    table = morning.groupby(['pid', 'month']).agg(d_t=('tin', 'mean'), e_t=('tout', 'mean'),
                                                  c_t=('deducted', 'mean'), b_t=('shift', 'mean'),
                                                  m_s_t=('saving', 'mean'), off=('off', 'sum'),
                                                  peak=('peak', 'sum'))
    table['m_s_t'] = table['m_s_t'].fillna(0.0)
    table['mode'] = mode_from_counts(table['off'].to_numpy(), table['peak'].to_numpy()).astype(int)
    return table


def _passenger_observations(pid: int,
                            months: pd.DataFrame,
                            home: int,
                            work: int,
                            w_u: int) -> list[MonthlyObservation]:
    """Observations for months -2..13 from one passenger's monthly table (index = month)."""
    full = months.reindex(range(FIRST_MONTH, LAST_MONTH + 1))
    no_data = full['mode'].isna()
    full['mode'] = full['mode'].fillna(0).astype(int)
    stats_cols = ['d_t', 'e_t', 'c_t', 'b_t', 'm_s_t']
    full[stats_cols] = full[stats_cols].ffill().bfill()
    if no_data.any():
        logger.debug('Months without morning trips carried forward', pid=pid, months=full.index[no_data].tolist())
    labels = full['mode'].to_dict()
    observations = []
    for m in range(FIRST_MONTH, LAST_MONTH + 1):
        source = max(m - 1, FIRST_MONTH)
        stats = full.loc[source, stats_cols]
        state = StateVector(l_home=home, l_work=work,
                            d_t=float(stats['d_t']), e_t=float(stats['e_t']), c_t=float(stats['c_t']),
                            b_t=float(stats['b_t']), m_p_t=m, m_s_t=float(stats['m_s_t']), w_u=w_u,
                            lambda_t=labels[source], lambda_prev=labels[max(m - 2, FIRST_MONTH)])
        observations.append(MonthlyObservation(passenger_id=pid, month_index=m, state=state,
                                               action=ActionLabel(labels[m])))
    return observations


def extract_features(trips: pd.DataFrame,
                     promotion: PromotionConfig,
                     profiles: Sequence[PassengerProfile] | None = None) -> list[ExpertTrajectory]:
    """Build every passenger's expert trajectory from the trip table.

    The observation at month m holds the statistics and mode of month m-1 (the most recent
    completed month), the mode of month m-2 and the action of month m. Month -2 bootstraps from its
    own statistics and mode. Passengers without both pre-promotion months, without any day of two
    trips, or without a weekday morning trip before the launch are excluded and counted in a warning.

    Args:
        trips: Trip table with the trip-file columns.
        promotion: Launch date and discount stations.
        profiles: Optional generator profiles; when given, passengers without trips also count as excluded.

    Returns:
        Trajectories sorted by passenger id.

    Raises:
        DataValidationError: A trip breaks the trip invariants, such as a discount outside the promotion.
    """
    validate_trips(trips, discount_stations=promotion.discount_stations, promotion_start=promotion.start_date)
    df = trips.copy()
    df['month'] = month_index(df['date'], promotion.start_date)
    df = df[(df['month'] >= FIRST_MONTH) & (df['month'] <= LAST_MONTH)]
    homes = _home_work_table(df)
    monthly = _monthly_table(df)

    expected = sorted({p.passenger_id for p in profiles}) if profiles is not None else sorted(df['pid'].unique())
    pre = df[df['month'].isin(PRE_PROMOTION_MONTHS)]
    pre_by_pid = dict(tuple(pre.groupby('pid')))
    monthly_by_pid = {pid: group.droplevel('pid') for pid, group in monthly.groupby(level='pid')}

    raw: dict[int, RawCondition] = {}
    observations: dict[int, list[MonthlyObservation]] = {}
    excluded = 0
    for pid in expected:
        pid = int(pid)  # noqa: PLW2901
        months = monthly_by_pid.get(pid)
        if (months is None or pid not in homes.index
                or not set(PRE_PROMOTION_MONTHS) <= set(months.index.tolist())):
            excluded += 1
            continue
        try:
            raw[pid] = compute_condition_features(pre_by_pid[pid])
        except InsufficientDataError:
            logger.debug('No weekday morning trip before the promotion', pid=pid)
            excluded += 1
            continue
        home, work = int(homes.loc[pid, 'home']), int(homes.loc[pid, 'work'])
        observations[pid] = _passenger_observations(pid, months, home, work,
                                                    int(work in promotion.discount_stations))
    if excluded:
        logger.warning('Passengers excluded for insufficient pre-promotion data', excluded=excluded)
    if not raw:
        return []

    pids = sorted(raw)
    groups = [quartile_grouping([getattr(raw[p], name) for p in pids]) for name in ('flex_raw', 'con_raw', 'dis_raw')]
    trajectories = [ExpertTrajectory(passenger_id=pid,
                                     observations=tuple(observations[pid]),
                                     condition=raw[pid].with_groups(groups[0][k], groups[1][k], groups[2][k]))
                    for k, pid in enumerate(pids)]
    logger.info('Features extracted', passengers=len(trajectories), excluded=excluded)
    return trajectories
