"""
Transformations of the raw series: 1-hour differencing, symbolic discretization,
distances between sensors, seasonal splitting and the normality diagnostic.
"""
import logging
from typing import Dict, Iterable, NamedTuple, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import Field
from scipy import stats
from typing_extensions import Literal

from stcausal.common_structures import ResultsConfig
from stcausal.datasets.series import (
    HOURS_PER_DAY,
    MINUTES_PER_DAY,
    DiffSeries,
    PollutantSeries,
    SymbolicPollutionDatabase,
)
from stcausal.exceptions import (
    DegenerateSeriesError,
    InsufficientDataError,
    TooFewSamplesError,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
DEGENERATE_STD = 1e-12

#: Meteorological seasons and the months they contain.
SEASONS: Dict[str, Tuple[int, ...]] = {
    "spring": (3, 4, 5),
    "summer": (6, 7, 8),
    "autumn": (9, 10, 11),
    "winter": (12, 1, 2),
}


def diff_normalize(series: PollutantSeries) -> DiffSeries:
    """
    Take the 1-hour differences of a series and z-normalize them.

    A difference is only defined between readings exactly one hour apart, gaps and missing
    readings give missing differences. When the differences have no spread every defined
    value is 0.

    Raises:
        DegenerateSeriesError: If fewer than two consecutive-hour differences exist.
    """
    timestamps = series.timestamps
    values = series.values
    if len(timestamps) < 2:
        raise DegenerateSeriesError(
            f"{series.key.label()} has {len(timestamps)} readings, "
            "at least 2 are needed to difference."
        )

    consecutive = np.diff(timestamps) == 1
    raw = np.where(consecutive, np.diff(values), np.nan)
    defined = ~np.isnan(raw)
    if defined.sum() < 2:
        raise DegenerateSeriesError(
            f"{series.key.label()} has fewer than 2 consecutive-hour reading pairs."
        )

    mean = float(raw[defined].mean())
    std = float(raw[defined].std())
    if std < DEGENERATE_STD:
        normalized = np.where(defined, 0.0, np.nan)
        std = 0.0
    else:
        normalized = (raw - mean) / std

    return DiffSeries(
        sensor_id=series.sensor_id,
        category=series.category,
        timestamps=timestamps[1:],
        values=normalized,
        mean=mean,
        std=std,
    )


def sax_breakpoints(alphabet: int) -> np.ndarray:
    """The equiprobable breakpoints of the standard Gaussian for an alphabet of the given size."""
    return stats.norm.ppf(np.arange(1, alphabet) / alphabet)


def _zscore(values: np.ndarray) -> Tuple[np.ndarray, bool]:
    std = values.std()
    if values.size == 0 or std < DEGENERATE_STD:
        return np.zeros_like(values), False
    return (values - values.mean()) / std, True


def sax_discretize(
    series: PollutantSeries,
    alphabet: int = 5,
    segment_minutes: int = 60,
    normalization: Literal["series", "day"] = "series",
) -> SymbolicPollutionDatabase:
    """
    Map a pollutant series onto daily sequences of symbolic levels.

    Readings are z-normalized (over the whole series by default), averaged per segment of
    each calendar day and mapped to the level whose Gaussian equiprobable band contains them.
    Days without readings are left out.

    Parameters:
        series: The hourly readings.
        alphabet: The number of levels, between 2 and 10.
        segment_minutes: The aggregation window, a whole number of hours dividing a day.
        normalization: Normalize over the whole ``series`` or within each ``day``.
    """
    if not 2 <= alphabet <= 10:
        raise ValueError(f"The alphabet size {alphabet} should be between 2 and 10.")
    if (
        segment_minutes <= 0
        or segment_minutes % 60
        or MINUTES_PER_DAY % segment_minutes
    ):
        raise ValueError(
            f"The segment of {segment_minutes} minutes should be a whole number of "
            "hours dividing a day."
        )

    defined = ~np.isnan(series.values)
    hours = series.timestamps[defined]
    readings = series.values[defined]
    median_level = int(np.ceil((alphabet + 1) / 2))

    minute_of_day = (hours % HOURS_PER_DAY) * 60
    frame = pd.DataFrame(
        {
            "day": hours // HOURS_PER_DAY,
            "segment": minute_of_day // segment_minutes * segment_minutes,
            "value": readings,
        }
    )
    if normalization == "series":
        frame["z"], spread = _zscore(readings)
        if not spread and readings.size:
            logger.warning(
                f"{series.key.label()} has no variance, every reading maps to level {median_level}."
            )
    else:
        frame["z"] = frame.groupby("day")["value"].transform(
            lambda day: _zscore(day.to_numpy())[0]
        )

    segments = frame.groupby(["day", "segment"], sort=True)["z"].mean()
    breakpoints = sax_breakpoints(alphabet)
    # a zero z-value always lands on the median level
    levels = np.digitize(segments.to_numpy(), breakpoints) + 1

    days, day_starts = [], []
    for (day, segment), level in zip(segments.index, levels):
        if not day_starts or day_starts[-1] != int(day) * HOURS_PER_DAY:
            day_starts.append(int(day) * HOURS_PER_DAY)
            days.append([])
        days[-1].append((int(level), int(segment)))

    return SymbolicPollutionDatabase(
        category=series.category,
        sensor_id=series.sensor_id,
        alphabet_size=alphabet,
        days=days,
        day_starts=day_starts,
    )


def haversine_km(
    p: Union[Tuple[float, float], np.ndarray], q: Union[Tuple[float, float], np.ndarray]
) -> float:
    """
    The great-circle distance in kilometres between two (latitude, longitude) points in degrees.
    """
    lat1, lon1 = np.radians(np.asarray(p, dtype=float))
    lat2, lon2 = np.radians(np.asarray(q, dtype=float))
    a = (
        np.sin((lat2 - lat1) / 2) ** 2
        + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    )
    return float(2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0))))


class SeasonalSplit(ResultsConfig):
    """
    The train and test hours of one season.
    """

    season: str = Field(..., description="The name of the season.")
    train_hours: np.ndarray = Field(..., description="The epoch hours used to train.")
    test_hours: np.ndarray = Field(..., description="The epoch hours held out to test.")

    @property
    def n_train_days(self) -> int:
        return int(np.unique(self.train_hours // HOURS_PER_DAY).size)

    @property
    def n_test_days(self) -> int:
        return int(np.unique(self.test_hours // HOURS_PER_DAY).size)


def season_of(months: np.ndarray) -> np.ndarray:
    """The season name of each month number."""
    lookup = {month: name for name, months_ in SEASONS.items() for month in months_}
    return np.array([lookup[int(m)] for m in months], dtype=object)


def split_seasonal(
    timestamps: Iterable[int], test_days: int, guard_hours: int = 0
) -> Dict[str, SeasonalSplit]:
    """
    Hold out the last ``test_days`` days of every season of every year.

    December belongs to the winter of its own year together with the following January and
    February. Train hours within ``guard_hours`` of a test window are left out of training.

    Parameters:
        timestamps: The epoch hours of the dataset.
        test_days: The number of days held out at the end of each season and year.
        guard_hours: The gap left between training and test hours.

    Returns:
        The split of each season present in the data, in calendar order of the seasons.

    Raises:
        InsufficientDataError: When a season of a year has fewer than ``2 * test_days`` days.
    """
    if test_days < 0:
        raise ValueError("The number of test days can not be negative.")
    hours = np.unique(np.asarray(list(timestamps), dtype=np.int64))
    dates = pd.DatetimeIndex(hours.astype("datetime64[h]"))
    seasons = season_of(dates.month.to_numpy())
    season_years = np.where(
        (seasons == "winter") & (dates.month.to_numpy() <= 2),
        dates.year.to_numpy() - 1,
        dates.year.to_numpy(),
    )
    days = hours // HOURS_PER_DAY

    splits = {}
    for season in SEASONS:
        in_season = seasons == season
        if not in_season.any():
            continue
        test_mask = np.zeros(hours.size, dtype=bool)
        for year in np.unique(season_years[in_season]):
            group = in_season & (season_years == year)
            group_days = np.unique(days[group])
            if group_days.size < 2 * test_days:
                raise InsufficientDataError(
                    f"the {season} of {year} has {group_days.size} days of data but "
                    f"{2 * test_days} are needed to hold out {test_days} test days."
                )
            if test_days:
                test_mask |= group & np.isin(days, group_days[-test_days:])

        train_mask = in_season & ~test_mask
        test_hours = hours[test_mask]
        if guard_hours and test_hours.size:
            # distance from each train hour to the nearest test hour
            index = np.searchsorted(test_hours, hours)
            after = test_hours[np.clip(index, 0, test_hours.size - 1)]
            before = test_hours[np.clip(index - 1, 0, test_hours.size - 1)]
            nearest = np.minimum(np.abs(after - hours), np.abs(hours - before))
            train_mask &= nearest > guard_hours

        splits[season] = SeasonalSplit(
            season=season, train_hours=hours[train_mask], test_hours=test_hours
        )
        logger.info(
            f"{season}: {splits[season].n_train_days} train days and "
            f"{splits[season].n_test_days} test days."
        )
    return splits


class NormalityResult(NamedTuple):
    statistic: float
    p_value: float


def normality_check(diffs: Union[DiffSeries, np.ndarray]) -> NormalityResult:
    """
    The D'Agostino-Pearson omnibus test of a sample of differences.

    The statistic is the sum of the squared skewness and kurtosis z-scores and the p-value
    is its chi-squared tail with two degrees of freedom.

    Raises:
        TooFewSamplesError: With fewer than 20 defined samples.
    """
    values = diffs.values if isinstance(diffs, DiffSeries) else np.asarray(diffs)
    values = values[~np.isnan(values)]
    if values.size < 20:
        raise TooFewSamplesError(
            f"the normality test needs at least 20 samples but {values.size} were given."
        )
    skewness = stats.skewtest(values).statistic
    kurtosis = stats.kurtosistest(values).statistic
    statistic = float(skewness ** 2 + kurtosis ** 2)
    return NormalityResult(statistic, float(stats.chi2.sf(statistic, 2)))
