import logging

import numpy as np
import pytest

from stcausal.common_structures import SeriesKey
from stcausal.datasets import (
    DiffPanel,
    PollutantSeries,
    diff_normalize,
    haversine_km,
    normality_check,
    sax_discretize,
    split_seasonal,
)
from stcausal.datasets.transforms import sax_breakpoints
from stcausal.exceptions import (
    DegenerateSeriesError,
    InsufficientDataError,
    TooFewSamplesError,
)

SPRING_START = np.datetime64("2015-03-01T00", "h").astype(np.int64)


def make_series(values, timestamps=None, category=1, sensor_id="s1"):
    values = np.asarray(values, dtype=float)
    if timestamps is None:
        timestamps = np.arange(values.size)
    return PollutantSeries(
        sensor_id=sensor_id, category=category, timestamps=timestamps, values=values
    )


def test_diff_normalize():
    diffs = diff_normalize(make_series([1.0, 2.0, 4.0, 7.0]))
    assert diffs.timestamps.tolist() == [1, 2, 3]
    assert diffs.mean == pytest.approx(2.0)
    assert diffs.std == pytest.approx(np.sqrt(2 / 3))
    np.testing.assert_allclose(diffs.values, [-np.sqrt(1.5), 0.0, np.sqrt(1.5)])
    np.testing.assert_allclose(diffs.denormalize(diffs.values), [1.0, 2.0, 3.0])


def test_diff_normalize_gaps():
    """
    Differences across a gap or a missing reading are missing.
    """
    diffs = diff_normalize(
        make_series([0.0, 1.0, 2.0, 4.0, 7.0, np.nan], [0, 1, 3, 4, 5, 6])
    )
    assert diffs.timestamps.tolist() == [1, 3, 4, 5, 6]
    defined = ~np.isnan(diffs.values)
    assert defined.tolist() == [True, False, True, True, False]
    assert diffs.mean == pytest.approx(2.0)


def test_diff_normalize_flat():
    """
    A series with constant differences normalizes to zeros and keeps its mean step.
    """
    diffs = diff_normalize(make_series([40.5, 43.5, 46.5, np.nan, 52.5, 55.5]))
    assert diffs.std == 0.0
    assert diffs.mean == pytest.approx(3.0)
    assert np.nansum(np.abs(diffs.values)) == 0.0
    assert np.isnan(diffs.values[2])


@pytest.mark.parametrize(
    "values, timestamps",
    [
        pytest.param([1.0], [0], id="single reading"),
        pytest.param([1.0, 2.0, 3.0], [0, 2, 4], id="no consecutive hours"),
        pytest.param([1.0, 2.0, np.nan], [0, 1, 2], id="one difference"),
    ],
)
def test_diff_normalize_degenerate(values, timestamps):
    with pytest.raises(DegenerateSeriesError):
        diff_normalize(make_series(values, timestamps))


def test_diff_panel_lookup():
    diffs = diff_normalize(make_series([1.0, 2.0, 4.0, 7.0]))
    panel = DiffPanel([diffs])
    assert SeriesKey(1, "s1") in panel
    assert panel.sensors() == ["s1"]
    looked_up = panel.lookup(SeriesKey(1, "s1"), np.array([0, 2, 9]))
    assert np.isnan(looked_up[0]) and np.isnan(looked_up[2])
    assert looked_up[1] == pytest.approx(0.0)
    assert np.isnan(panel.lookup(SeriesKey(2, "s1"), np.array([1]))).all()


def test_sax_breakpoints():
    np.testing.assert_allclose(sax_breakpoints(3), [-0.4307273, 0.4307273], atol=1e-6)
    np.testing.assert_allclose(
        sax_breakpoints(4), [-0.6744898, 0.0, 0.6744898], atol=1e-6
    )


def test_sax_discretize():
    """
    A rising daily profile maps to rising levels, one event per hour.
    """
    database = sax_discretize(make_series(np.tile(np.arange(24.0), 2)), alphabet=3)
    assert database.n_days == 2
    assert database.day_starts == [0, 24]
    day = database.days[0]
    assert [offset for _, offset in day] == list(range(0, 1440, 60))
    levels = [level for level, _ in day]
    assert levels == sorted(levels)
    assert levels[0] == 1 and levels[-1] == 3
    assert database.days[0] == database.days[1]


def test_sax_discretize_segments():
    database = sax_discretize(
        make_series(np.tile(np.arange(24.0), 2)), alphabet=3, segment_minutes=120
    )
    assert [offset for _, offset in database.days[0]] == list(range(0, 1440, 120))


def test_sax_discretize_skips_empty_days():
    values = np.concatenate([np.arange(24.0), np.full(24, np.nan), np.arange(24.0)])
    database = sax_discretize(make_series(values))
    assert database.day_starts == [0, 48]


def test_sax_discretize_flat(caplog):
    """
    A flat series maps every reading to the median level.
    """
    with caplog.at_level(logging.WARNING):
        database = sax_discretize(make_series(np.full(24, 5.0)), alphabet=5)
    assert {level for level, _ in database.days[0]} == {3}
    assert "no variance" in caplog.text


def test_sax_discretize_per_day():
    """
    Day normalization removes a shift between days.
    """
    values = np.concatenate([np.arange(24.0), np.arange(24.0) + 100.0])
    by_day = sax_discretize(make_series(values), alphabet=4, normalization="day")
    assert by_day.days[0] == by_day.days[1]
    by_series = sax_discretize(make_series(values), alphabet=4)
    assert by_series.days[0] != by_series.days[1]


@pytest.mark.parametrize(
    "alphabet, segment_minutes",
    [
        pytest.param(1, 60, id="alphabet too small"),
        pytest.param(11, 60, id="alphabet too large"),
        pytest.param(5, 90, id="partial hours"),
        pytest.param(5, 420, id="does not divide a day"),
    ],
)
def test_sax_discretize_bad_parameters(alphabet, segment_minutes):
    with pytest.raises(ValueError):
        sax_discretize(
            make_series(np.arange(24.0)),
            alphabet=alphabet,
            segment_minutes=segment_minutes,
        )


def test_haversine():
    assert haversine_km((39.9, 116.4), (39.9, 116.4)) == 0.0
    assert haversine_km((0.0, 0.0), (0.0, 1.0)) == pytest.approx(111.195, abs=1e-3)
    # Beijing to Shanghai
    assert haversine_km((39.9042, 116.4074), (31.2304, 121.4737)) == pytest.approx(
        1067, rel=0.01
    )


def test_split_seasonal():
    """
    The last days of a season are held out with a guard gap before them.
    """
    hours = SPRING_START + np.arange(92 * 24)
    splits = split_seasonal(hours, test_days=15, guard_hours=3)
    assert list(splits) == ["spring"]
    spring = splits["spring"]
    assert spring.n_test_days == 15
    assert spring.n_train_days == 77
    assert spring.test_hours.size == 15 * 24
    assert spring.train_hours.size == 77 * 24 - 3
    assert spring.test_hours[0] - spring.train_hours[-1] == 4
    assert np.intersect1d(spring.train_hours, spring.test_hours).size == 0


def test_split_seasonal_winter_spans_years():
    """
    December joins the following January and February.
    """
    start = np.datetime64("2014-12-01T00", "h").astype(np.int64)
    hours = start + np.arange(90 * 24)
    splits = split_seasonal(hours, test_days=5)
    assert list(splits) == ["winter"]
    first_test = np.datetime64(int(splits["winter"].test_hours[0]), "h")
    assert str(first_test) == "2015-02-24T00"


def test_split_seasonal_several_seasons():
    hours = SPRING_START - 30 * 24 + np.arange(60 * 24)
    splits = split_seasonal(hours, test_days=5)
    assert list(splits) == ["spring", "winter"]
    assert splits["winter"].n_train_days == 25
    assert splits["spring"].n_train_days == 25


def test_split_seasonal_insufficient():
    hours = SPRING_START + np.arange(20 * 24)
    with pytest.raises(InsufficientDataError):
        split_seasonal(hours, test_days=15)


def test_normality_check(rng):
    gaussian = normality_check(rng.normal(size=2000))
    assert gaussian.p_value > 1e-3
    skewed = normality_check(rng.exponential(size=2000))
    assert skewed.p_value < 1e-6


def test_normality_check_too_few():
    with pytest.raises(TooFewSamplesError):
        normality_check(np.arange(10.0))
