"""Adopter taxonomy from monthly mode series."""

from collections.abc import Iterable, Mapping

from loguru import logger

from gcgail.panel.types import (
    EARLY_MORNING_BAND,
    LAST_MONTH,
    MORNING_PEAK_BAND,
    AdopterType,
    ExpertTrajectory,
    in_window,
)

# consecutive off-peak months that mark a switch
CHANGE_POINT_RUN = 2


def change_point(modes: Mapping[int, int]) -> int | None:
    """First month >= 0 that starts a run of two off-peak months, or None."""
    for m in range(LAST_MONTH):
        if all(modes.get(m + k, 0) == 1 for k in range(CHANGE_POINT_RUN)):
            return m
    return None


def _band_type(tap_outs: Mapping[int, float], before: int) -> AdopterType:
    """Early-morning or morning-peak band from the months before `before`.

    `tap_outs` holds each month's mean morning tap-out as stored in the state vectors (e_t), not
    individual trips; a tie counts as morning peak.
    """
    early = sum(1 for m, out in tap_outs.items() if m < before and in_window(out, EARLY_MORNING_BAND))
    peak = sum(1 for m, out in tap_outs.items() if m < before and in_window(out, MORNING_PEAK_BAND))
    return AdopterType.EARLY_MORNING if early > peak else AdopterType.MORNING_PEAK


def adopter_types(trajectory: ExpertTrajectory) -> frozenset[AdopterType]:
    """Archetypes of one passenger; empty for a non-adopter."""
    modes = trajectory.modes_by_month()
    start = change_point(modes)
    if start is None:
        return frozenset()
    types = {AdopterType.EARLY if start <= 1 else AdopterType.LATE,
             _band_type(trajectory.tap_out_by_month(), start)}
    tail = [modes.get(m, 0) for m in range(start, LAST_MONTH + 1)]
    if all(mode == 1 for mode in tail):
        types.add(AdopterType.SUSTAINED)
    elif tail[-1] == 0:
        types.add(AdopterType.ATTRITION)
    return frozenset(types)


def classify_adopters(trajectories: Iterable[ExpertTrajectory]) -> dict[int, frozenset[AdopterType]]:
    """Map passenger id to its adopter types.

    A change point is the first month from launch that opens two consecutive off-peak months. Early
    adopters switch in month 0 or 1, late adopters afterwards. Attrition means the series ends in a run
    of peak months; sustained means off-peak from the change point to the end. The band type follows
    whichever morning band held most of the pre-switch monthly mean tap-outs, ties going to the
    morning peak.
    """
    result = {t.passenger_id: adopter_types(t) for t in trajectories}
    logger.debug('Adopters classified', passengers=len(result), adopters=sum(1 for v in result.values() if v))
    return result
