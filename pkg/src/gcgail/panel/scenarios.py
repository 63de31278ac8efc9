"""Train/test split and the training-set filters of the robustness experiments."""

from collections.abc import Sequence
from enum import Enum

import numpy as np
from loguru import logger

from gcgail.errors import ConfigError
from gcgail.panel.types import ExpertTrajectory

TEST_FRACTION = 0.2
# share of discount stations kept by the half-network filter (16 of 29)
HALF_NETWORK_DISCOUNT_SHARE = 16 / 29
_SPLIT_STREAM, _FILTER_STREAM = 0, 1


class Scenario(str, Enum):
    """Training-set variants."""

    FULL = 'full'
    HALF_STATIONS = 'half_stations'
    P10 = 'p10'
    P30 = 'p30'
    P50 = 'p50'
    P70 = 'p70'
    P90 = 'p90'
    WF3 = 'wf3'
    WC2 = 'wc2'
    WD2 = 'wd2'
    GES = 'ges'

    @classmethod
    def parse(cls, name: str) -> 'Scenario':
        """Look up a scenario by name.

        Raises:
            ConfigError: Unknown name.
        """
        try:
            return cls(name.strip().lower())
        except ValueError:
            msg = f'Unknown scenario {name!r}; expected one of {[s.value for s in cls]}'
            raise ConfigError(msg) from None

    @property
    def proportion(self) -> float | None:
        """Kept fraction of training passengers for the proportion scenarios."""
        if self.value.startswith('p'):
            return int(self.value[1:]) / 100.0
        return None

    @property
    def excluded_groups(self) -> dict[str, int]:
        """Quartile groups dropped from training, keyed by trait."""
        return {Scenario.WF3: {'flex': 3},
                Scenario.WC2: {'con': 2},
                Scenario.WD2: {'dis': 2},
                Scenario.GES: {'flex': 3, 'con': 2, 'dis': 2}}.get(self, {})


def _excluded(trajectory: ExpertTrajectory, groups: dict[str, int]) -> bool:
    cond = trajectory.condition
    labels = {'flex': cond.g_flex, 'con': cond.g_con, 'dis': cond.g_dis}
    return any(labels[name] == group for name, group in groups.items())


def half_network(trajectories: Sequence[ExpertTrajectory], rng: np.random.Generator) -> set[int]:
    """Random half of the observed stations, keeping discount stations at the reference share."""
    stations = sorted({t.home_station for t in trajectories} | {t.work_station for t in trajectories})
    discount = sorted({t.work_station for t in trajectories if t.observations[0].state.w_u == 1})
    regular = [s for s in stations if s not in set(discount)]
    n_keep = round(len(stations) / 2)
    n_discount = min(len(discount), round(HALF_NETWORK_DISCOUNT_SHARE * len(discount)), n_keep)
    kept = set(rng.choice(discount, size=n_discount, replace=False).tolist()) if n_discount else set()
    n_regular = min(len(regular), n_keep - n_discount)
    if n_regular:
        kept |= set(rng.choice(regular, size=n_regular, replace=False).tolist())
    return {int(s) for s in kept}


def station_coverage(subset: Sequence[ExpertTrajectory], population: Sequence[ExpertTrajectory]) -> float:
    """Share of the population's work stations present in the subset."""
    everywhere = {t.work_station for t in population}
    if not everywhere:
        return 0.0
    return len({t.work_station for t in subset} & everywhere) / len(everywhere)


def split_and_filter(trajectories: Sequence[ExpertTrajectory],
                     scenario: Scenario | str,
                     seed: int) -> tuple[list[ExpertTrajectory], list[ExpertTrajectory]]:
    """Split passengers 80/20, then filter the training side for the scenario.

    The split depends only on the passenger ids and the seed, so every scenario sees the same test set.

    Args:
        trajectories: All expert trajectories.
        scenario: Scenario or its name.
        seed: Split and filter seed.

    Returns:
        ``(train, test)``, each sorted by passenger id.

    Raises:
        ConfigError: Unknown scenario, or the filter leaves no training passenger.
    """
    scenario = scenario if isinstance(scenario, Scenario) else Scenario.parse(scenario)
    ordered = sorted(trajectories, key=lambda t: t.passenger_id)
    order = np.random.default_rng([seed, _SPLIT_STREAM]).permutation(len(ordered))
    n_test = round(TEST_FRACTION * len(ordered))
    test_idx = set(order[:n_test].tolist())
    test = [t for k, t in enumerate(ordered) if k in test_idx]
    train = [t for k, t in enumerate(ordered) if k not in test_idx]

    rng = np.random.default_rng([seed, _FILTER_STREAM])
    if scenario is Scenario.HALF_STATIONS:
        kept = half_network(ordered, rng)
        train = [t for t in train if t.work_station in kept]
    elif scenario.proportion is not None:
        n_keep = round(scenario.proportion * len(train))
        keep = set(rng.choice(len(train), size=n_keep, replace=False).tolist())
        train = [t for k, t in enumerate(train) if k in keep]
    elif scenario.excluded_groups:
        train = [t for t in train if not _excluded(t, scenario.excluded_groups)]

    if not train:
        msg = f'Scenario {scenario.value} leaves no training passenger'
        raise ConfigError(msg)
    logger.info('Scenario applied', scenario=scenario.value, train=len(train), test=len(test),
                station_coverage=round(station_coverage(train, ordered), 4))
    return train, test
