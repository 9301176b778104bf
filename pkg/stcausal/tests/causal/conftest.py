from typing import Dict, NamedTuple

import numpy as np
import pytest

from stcausal.common_structures import SeriesKey
from stcausal.datasets import (
    DiffPanel,
    MeteoSeries,
    PollutantSeries,
    diff_normalize,
)
from stcausal.matching import Candidate, CandidateSet

START = np.datetime64("2015-03-01T00", "h").astype(np.int64)

TARGET = SeriesKey(1, "s1")


class LinearSystem(NamedTuple):
    series: Dict[SeriesKey, PollutantSeries]
    diffs: DiffPanel
    hours: np.ndarray
    meteo: MeteoSeries
    regimes: np.ndarray


def make_system(
    seed: int = 3,
    n_hours: int = 1500,
    strength: float = 0.8,
    switching: bool = False,
) -> LinearSystem:
    """
    Three sensors: the differences of s1 follow those of s2 an hour later, s3 is
    independent noise. With switching the sign of the effect flips with a hidden regime
    which the environmental signal reveals.
    """
    rng = np.random.default_rng(seed)
    driver = rng.normal(size=n_hours)
    noise = rng.normal(size=n_hours)
    unrelated = rng.normal(size=n_hours)

    regimes = np.zeros(n_hours, dtype=int)
    if switching:
        flips = rng.random(n_hours) > 0.98
        for t in range(1, n_hours):
            regimes[t] = 1 - regimes[t - 1] if flips[t] else regimes[t - 1]
    effect = np.where(regimes == 0, strength, -strength)

    target = np.zeros(n_hours)
    target[0] = 0.5 * noise[0]
    for t in range(1, n_hours):
        own = 0.0 if switching else 0.3 * target[t - 1]
        target[t] = own + effect[t] * driver[t - 1] + 0.5 * noise[t]

    hours = START + np.arange(n_hours)
    series = {}
    for sensor_id, steps in (("s1", target), ("s2", driver), ("s3", unrelated)):
        series[SeriesKey(1, sensor_id)] = PollutantSeries(
            sensor_id=sensor_id,
            category=1,
            timestamps=hours,
            values=500.0 + np.cumsum(steps),
        )
    diffs = DiffPanel([diff_normalize(s) for s in series.values()])
    environment = rng.normal(size=(n_hours, 2)) + 4.0 * regimes[:, None]
    meteo = MeteoSeries(
        timestamps=hours, vectors=environment, columns=["c0_T", "c0_H"]
    )
    return LinearSystem(series, diffs, hours, meteo, regimes)


@pytest.fixture(scope="module")
def system():
    return make_system()


@pytest.fixture(scope="module")
def switching_system():
    return make_system(seed=11, n_hours=3000, strength=0.9, switching=True)


def make_candidates() -> CandidateSet:
    return CandidateSet(
        category=1,
        sensor_id="s1",
        candidates=[
            Candidate(sensor_id="s3", category=1, corr=0.9, distance_km=1.0),
            Candidate(sensor_id="s2", category=1, corr=0.8, distance_km=2.0),
        ],
    )


@pytest.fixture
def candidates():
    return make_candidates()
