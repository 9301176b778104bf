"""
Tests for pattern matching between sensors and the candidate causer selection.
"""
import numpy as np
import pytest

from stcausal.common_structures import SeriesKey
from stcausal.datasets import SensorMeta
from stcausal.exceptions import EmptyTimestampListError, NoPatternsError
from stcausal.matching import (
    CandidateSet,
    candidate_causers,
    match_stats,
    match_timestamps,
    matched_training_windows,
    pattern_corr,
)
from stcausal.patterns import EvolvingPattern, PatternSet

BASE = 600_000


def make_patterns(category, sensor_id, minutes):
    """A pattern set whose single pattern starts once a day at the given minutes."""
    occurrences = [(day, BASE + minute) for day, minute in enumerate(minutes)]
    patterns = []
    if occurrences:
        patterns.append(
            EvolvingPattern(
                levels=[1, 2],
                delta_t=60,
                support=len(occurrences),
                occurrences=occurrences,
            )
        )
    return PatternSet(
        category=category,
        sensor_id=sensor_id,
        min_support=1,
        delta_t=60,
        patterns=patterns,
    )


@pytest.fixture
def sensors():
    locations = {"s1": (0.0, 0.0), "s2": (0.0, 0.1), "s3": (0.0, 1.0), "s4": (0.0, 5.0)}
    return {
        name: SensorMeta(sensor_id=name, city_id="c", latitude=lat, longitude=lon)
        for name, (lat, lon) in locations.items()
    }


@pytest.fixture
def patterns():
    """
    s2 PM25 leads every target start by an hour, s2 PM10 only the first one, s3 lags
    the target and s4 leads it but is far away.
    """
    target = [0, 1440, 2880]
    pattern_sets = [
        make_patterns(1, "s1", target),
        make_patterns(2, "s1", [t - 60 for t in target]),
        make_patterns(1, "s2", [t - 60 for t in target]),
        make_patterns(2, "s2", [-60]),
        make_patterns(1, "s3", [t + 300 for t in target]),
        make_patterns(1, "s4", [t - 120 for t in target]),
    ]
    return {p.key: p for p in pattern_sets}


def brute_force_pairs(target, causer, lag):
    return [(t, c) for t in target for c in causer if 0 <= t - c <= lag]


def test_match_stats():
    stats = match_stats([0, 100, 200, 300], [0, 50, 150, 500], lag=60)
    assert stats.precision == pytest.approx(0.75)
    assert stats.recall == pytest.approx(0.75)
    assert stats.corr == pytest.approx(0.75)
    assert stats.matched_pairs == [(0, 0), (100, 50), (200, 150)]
    assert stats.n_matched == 3

    printed = match_stats([0, 100, 200, 300], [0, 50, 150, 500], 60, "printed")
    assert printed.corr == pytest.approx(1.0)


def test_match_is_directional():
    """
    A causer start after the target start never matches.
    """
    stats = match_stats([100], [101], lag=60)
    assert stats.precision == 0.0 and stats.recall == 0.0 and stats.corr == 0.0


@pytest.mark.parametrize(
    "target, causer",
    [
        pytest.param([], [1, 2], id="empty target"),
        pytest.param([1, 2], [], id="empty causer"),
    ],
)
def test_match_stats_empty(target, causer):
    with pytest.raises(EmptyTimestampListError):
        match_stats(target, causer, lag=60)


@pytest.mark.parametrize(
    "precision, recall, rule, expected",
    [
        pytest.param(0.0, 0.0, "harmonic", 0.0, id="undefined harmonic"),
        pytest.param(0.0, 0.0, "printed", 0.0, id="undefined printed"),
        pytest.param(1.0, 0.5, "harmonic", 2 / 3, id="harmonic"),
        pytest.param(1.0, 0.5, "printed", 4 / 3, id="printed"),
    ],
)
def test_pattern_corr(precision, recall, rule, expected):
    assert pattern_corr(precision, recall, rule) == pytest.approx(expected)


@pytest.mark.parametrize("seed", range(500))
def test_match_timestamps_against_brute_force(seed):
    """
    The merge scan finds exactly the pairs of an exhaustive comparison.
    """
    rng = np.random.default_rng(seed)
    target = np.sort(rng.choice(2000, int(rng.integers(1, 30)), replace=False))
    causer = np.sort(rng.choice(2000, int(rng.integers(1, 30)), replace=False))
    lag = int(rng.integers(0, 240))

    matched_target, matched_causer, pairs = match_timestamps(target, causer, lag)
    expected = brute_force_pairs(target.tolist(), causer.tolist(), lag)
    assert pairs == expected
    assert matched_target.tolist() == sorted({t for t, _ in expected})
    assert matched_causer.tolist() == sorted({c for _, c in expected})


def test_match_monotone_in_lag(rng):
    """
    Precision and recall never drop as the matching horizon grows.
    """
    target = np.sort(rng.choice(10_000, 60, replace=False))
    causer = np.sort(rng.choice(10_000, 60, replace=False))
    previous = None
    for lag in [0, 30, 60, 120, 180, 360, 720]:
        stats = match_stats(target, causer, lag)
        if previous is not None:
            assert stats.precision >= previous.precision
            assert stats.recall >= previous.recall
        previous = stats


def test_candidate_causers(patterns, sensors):
    """
    Only near sensors whose patterns anticipate the target pass, with their best category.
    """
    candidates = candidate_causers(SeriesKey(1, "s1"), patterns, sensors)
    assert [(c.sensor_id, c.category) for c in candidates] == [("s2", 1)]
    assert candidates.candidates[0].corr == pytest.approx(1.0)
    assert candidates.candidates[0].distance_km == pytest.approx(11.12, abs=0.01)


def test_candidate_causers_ranking(patterns, sensors):
    """
    Candidates are ordered by correlation then distance.
    """
    candidates = candidate_causers(
        SeriesKey(1, "s1"),
        patterns,
        sensors,
        max_distance_km=float("inf"),
        min_corr=0.0,
    )
    assert [c.sensor_id for c in candidates] == ["s2", "s4", "s3"]
    assert [c.corr for c in candidates] == pytest.approx([1.0, 1.0, 0.0])

    top = candidate_causers(
        SeriesKey(1, "s1"),
        patterns,
        sensors,
        max_distance_km=float("inf"),
        min_corr=0.0,
        top_x=1,
    )
    assert [c.sensor_id for c in top] == ["s2"]


def test_candidate_causers_lag(patterns, sensors):
    """
    A two hour lead is only matched with a long enough horizon.
    """
    short = candidate_causers(
        SeriesKey(1, "s1"), patterns, sensors, max_distance_km=1000, lag_hours=1
    )
    assert [c.sensor_id for c in short] == ["s2"]
    long = candidate_causers(
        SeriesKey(1, "s1"), patterns, sensors, max_distance_km=1000, lag_hours=2
    )
    assert [c.sensor_id for c in long] == ["s2", "s4"]


def test_candidate_causers_categories(patterns, sensors):
    """
    Restricting the causer categories changes the best category of a sensor.
    """
    candidates = candidate_causers(
        SeriesKey(1, "s1"), patterns, sensors, min_corr=0.4, categories=[2]
    )
    assert [(c.sensor_id, c.category) for c in candidates] == [("s2", 2)]
    assert candidates.candidates[0].corr == pytest.approx(0.5)


def test_candidate_causers_no_patterns(patterns, sensors):
    patterns[SeriesKey(1, "s1")] = make_patterns(1, "s1", [])
    with pytest.raises(NoPatternsError):
        candidate_causers(SeriesKey(1, "s1"), patterns, sensors)
    with pytest.raises(NoPatternsError):
        candidate_causers(SeriesKey(3, "s1"), patterns, sensors)


def test_candidate_document(patterns, sensors):
    candidates = candidate_causers(SeriesKey(1, "s1"), patterns, sensors)
    document = candidates.to_document()
    assert document["target"]["pollutant"] == "PM25"
    assert document["candidates"][0]["sensor"] == "s2"
    assert CandidateSet.from_document(document) == candidates


def test_matched_training_windows(patterns):
    """
    The windows are the target starts anticipated by a candidate, in epoch hours.
    """
    target = patterns[SeriesKey(1, "s1")]
    windows = matched_training_windows(target, [patterns[SeriesKey(2, "s2")]])
    assert windows.tolist() == [BASE // 60]
    every = matched_training_windows(target, [])
    assert every.tolist() == [BASE // 60, BASE // 60 + 24, BASE // 60 + 48]
    both = matched_training_windows(
        target, [patterns[SeriesKey(2, "s2")], patterns[SeriesKey(1, "s3")]]
    )
    assert both.tolist() == [BASE // 60]
