"""
The core data model: sensors, raw and differenced pollutant series, gridded meteorology
and symbolic pollution databases.

All timestamps are integer epoch hours (hours since 1970-01-01T00:00 in the dataset's
fixed local offset); intra-day offsets of symbolic events are minutes from midnight.
"""
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import Field, PositiveInt, validator

from stcausal.common_structures import ResultsConfig, SeriesKey
from stcausal.validators import (
    check_latitude,
    check_longitude,
    check_strictly_increasing,
)

MINUTES_PER_DAY = 1440
HOURS_PER_DAY = 24


def iso_to_epoch_hours(timestamps: Iterable[str]) -> np.ndarray:
    """Convert ISO-8601 timestamps to epoch hours, minutes and seconds are truncated."""
    parsed = pd.to_datetime(pd.Series(list(timestamps), dtype=str))
    return parsed.values.astype("datetime64[h]").astype(np.int64)


def epoch_hours_to_iso(hours: Iterable[int]) -> List[str]:
    """Format epoch hours as ``YYYY-MM-DDTHH:00:00`` strings."""
    stamps = np.asarray(list(hours), dtype=np.int64).astype("datetime64[h]")
    return [str(s) for s in np.datetime_as_string(stamps, unit="s")]


def epoch_minutes_to_iso(minutes: int) -> str:
    """Format an epoch minute as an ISO-8601 string."""
    return str(np.datetime_as_string(np.datetime64(int(minutes), "m"), unit="s"))


class SensorMeta(ResultsConfig):
    """
    The location of a monitoring sensor.
    """

    sensor_id: str = Field(..., description="The unique identifier of the sensor.")
    city_id: str = Field(..., description="The city or region the sensor belongs to.")
    latitude: float = Field(..., description="The latitude of the sensor in degrees.")
    longitude: float = Field(
        ..., description="The longitude of the sensor in degrees."
    )

    _check_latitude = validator("latitude", allow_reuse=True)(check_latitude)
    _check_longitude = validator("longitude", allow_reuse=True)(check_longitude)

    @property
    def location(self) -> Tuple[float, float]:
        return self.latitude, self.longitude


class _TimeSeries(ResultsConfig):
    """
    Shared handling of the timestamp axis of the series types.
    """

    timestamps: np.ndarray = Field(
        ..., description="Strictly increasing epoch hours of the readings."
    )

    _check_timestamps = validator("timestamps", pre=True, allow_reuse=True)(
        check_strictly_increasing
    )

    def __len__(self) -> int:
        return len(self.timestamps)

    def positions(self, hours: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Find where the requested epoch hours sit in this series.

        Returns:
            The index of each hour (clipped into range) and a mask of the hours which
            are actually present.
        """
        hours = np.asarray(hours, dtype=np.int64)
        index = np.searchsorted(self.timestamps, hours)
        index = np.clip(index, 0, max(len(self.timestamps) - 1, 0))
        if len(self.timestamps) == 0:
            return index, np.zeros(hours.shape, dtype=bool)
        return index, self.timestamps[index] == hours


class PollutantSeries(_TimeSeries):
    """
    The hourly concentration readings of one pollutant at one sensor, missing readings are NaN.
    """

    sensor_id: str = Field(..., description="The sensor which made the readings.")
    category: PositiveInt = Field(
        ..., description="The 1-based pollutant category index."
    )
    values: np.ndarray = Field(..., description="The concentration readings.")

    @validator("values", pre=True)
    def _check_values(cls, readings, values):
        readings = np.asarray(readings, dtype=float)
        timestamps = values.get("timestamps")
        if timestamps is not None and readings.shape != timestamps.shape:
            raise ValueError(
                f"There are {readings.size} values for {timestamps.size} timestamps."
            )
        return readings

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    def values_at(self, hours: np.ndarray) -> np.ndarray:
        """The readings at the requested hours, NaN where there is no reading."""
        index, present = self.positions(hours)
        out = np.full(np.shape(hours), np.nan)
        if len(self.values):
            out[present] = self.values[index[present]]
        return out

    def restrict(self, hours: np.ndarray) -> "PollutantSeries":
        """A copy of the series keeping only the readings at the given hours."""
        keep = np.isin(self.timestamps, hours)
        return PollutantSeries(
            sensor_id=self.sensor_id,
            category=self.category,
            timestamps=self.timestamps[keep],
            values=self.values[keep],
        )


class DiffSeries(_TimeSeries):
    """
    z-normalized 1-hour differences of a pollutant series, the working representation of
    the causal model. ``mean`` and ``std`` are the moments of the raw differences and are
    used to map model estimates back to concentrations.
    """

    sensor_id: str
    category: PositiveInt
    values: np.ndarray = Field(
        ..., description="The normalized differences, NaN where one is missing."
    )
    mean: float = Field(0.0, description="The mean of the raw 1-hour differences.")
    std: float = Field(
        1.0,
        description="The standard deviation of the raw 1-hour differences, 0 if flat.",
    )

    @validator("values", pre=True)
    def _check_values(cls, readings, values):
        readings = np.asarray(readings, dtype=float)
        timestamps = values.get("timestamps")
        if timestamps is not None and readings.shape != timestamps.shape:
            raise ValueError(
                f"There are {readings.size} values for {timestamps.size} timestamps."
            )
        return readings

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    def values_at(self, hours: np.ndarray) -> np.ndarray:
        index, present = self.positions(hours)
        out = np.full(np.shape(hours), np.nan)
        if len(self.values):
            out[present] = self.values[index[present]]
        return out

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        """Map normalized differences back to raw concentration differences."""
        return np.asarray(z, dtype=float) * self.std + self.mean


class MeteoSeries(_TimeSeries):
    """
    The environmental vector E_t per hour, five measurements for each grid cell in row major order.
    """

    vectors: np.ndarray = Field(..., description="The T x D environmental vectors.")
    columns: List[str] = Field(
        ..., description="The name of each of the D dimensions, e.g. ``c0_T``."
    )

    @validator("vectors", pre=True)
    def _check_vectors(cls, vectors, values):
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2:
            raise ValueError("The environmental vectors should be a 2D array.")
        timestamps = values.get("timestamps")
        if timestamps is not None and vectors.shape[0] != timestamps.size:
            raise ValueError(
                f"There are {vectors.shape[0]} vectors for {timestamps.size} timestamps."
            )
        return vectors

    @validator("columns")
    def _check_columns(cls, columns, values):
        vectors = values.get("vectors")
        if vectors is not None and len(columns) != vectors.shape[1]:
            raise ValueError(
                f"There are {len(columns)} column names for {vectors.shape[1]} dimensions."
            )
        return columns

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def at(self, hours: np.ndarray) -> np.ndarray:
        """The environmental vectors at the requested hours, NaN rows where missing."""
        index, present = self.positions(hours)
        out = np.full((len(np.atleast_1d(hours)), self.dimension), np.nan)
        if len(self.timestamps):
            out[present] = self.vectors[index[present]]
        return out

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.vectors, columns=self.columns)
        frame.insert(0, "timestamp", epoch_hours_to_iso(self.timestamps))
        return frame


class SymbolicPollutionDatabase(ResultsConfig):
    """
    The daily symbol sequences of one pollutant at one sensor.

    Each day is a list of ``(level, offset)`` events where the level is a symbol in
    ``[1, alphabet_size]`` and the offset is minutes from the start of the day.
    """

    category: PositiveInt = Field(1, description="The pollutant category index.")
    sensor_id: str = Field("s0", description="The sensor the readings came from.")
    alphabet_size: PositiveInt = Field(..., description="The number of levels.")
    days: List[List[Tuple[int, int]]] = Field(
        ..., description="The (level, minute offset) events of each day."
    )
    day_starts: Optional[List[int]] = Field(
        None,
        description="The epoch hour of midnight of each day, consecutive days from the "
        "epoch by default.",
    )

    @validator("days")
    def _check_days(cls, days, values):
        alphabet = values.get("alphabet_size")
        for index, day in enumerate(days):
            offsets = [offset for _, offset in day]
            if any(b <= a for a, b in zip(offsets, offsets[1:])):
                raise ValueError(f"The offsets of day {index} are not increasing.")
            if offsets and not (0 <= offsets[0] and offsets[-1] < MINUTES_PER_DAY):
                raise ValueError(f"The offsets of day {index} are outside one day.")
            if alphabet is not None and any(
                not 1 <= level <= alphabet for level, _ in day
            ):
                raise ValueError(
                    f"Day {index} contains a level outside of [1, {alphabet}]."
                )
        return days

    @validator("day_starts", always=True)
    def _default_day_starts(cls, day_starts, values):
        days = values.get("days")
        if days is None:
            return day_starts
        if day_starts is None:
            return [HOURS_PER_DAY * index for index in range(len(days))]
        if len(day_starts) != len(days):
            raise ValueError(
                f"There are {len(day_starts)} day starts for {len(days)} days."
            )
        return day_starts

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    @property
    def n_days(self) -> int:
        return len(self.days)

    def event_time(self, day: int, offset: int) -> int:
        """The absolute epoch minute of an event."""
        return self.day_starts[day] * 60 + offset


class AirQualityDataset(ResultsConfig):
    """
    The immutable container of everything ingested for one study region.
    """

    sensors: Dict[str, SensorMeta] = Field(
        ..., description="The sensor metadata keyed by sensor id."
    )
    series: List[PollutantSeries] = Field(
        ..., description="The pollutant series sorted by sensor then category."
    )
    meteorology: Optional[MeteoSeries] = Field(
        None, description="The gridded meteorology of the region if available."
    )

    def __iter__(self) -> Iterator[PollutantSeries]:
        return iter(self.series)

    def keys(self) -> List[SeriesKey]:
        return [s.key for s in self.series]

    def get(self, key: SeriesKey) -> PollutantSeries:
        for series in self.series:
            if series.key == key:
                return series
        raise KeyError(f"There is no series for {key.label()} in the dataset.")

    @property
    def categories(self) -> List[int]:
        return sorted({s.category for s in self.series})

    def all_hours(self) -> np.ndarray:
        if not self.series:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([s.timestamps for s in self.series]))


class DiffPanel:
    """
    Fast lookup of differenced series by (category, sensor).
    """

    def __init__(self, series: Iterable[DiffSeries]):
        self._series: Dict[SeriesKey, DiffSeries] = {s.key: s for s in series}

    def __contains__(self, key: SeriesKey) -> bool:
        return key in self._series

    def __getitem__(self, key: SeriesKey) -> DiffSeries:
        return self._series[key]

    def __len__(self) -> int:
        return len(self._series)

    def keys(self) -> List[SeriesKey]:
        return sorted(self._series)

    def sensors(self) -> List[str]:
        return sorted({key.sensor_id for key in self._series})

    def categories(self, sensor_id: Optional[str] = None) -> List[int]:
        return sorted(
            {
                key.category
                for key in self._series
                if sensor_id is None or key.sensor_id == sensor_id
            }
        )

    def lookup(self, key: SeriesKey, hours: np.ndarray) -> np.ndarray:
        """The normalized differences at the requested hours, NaN when absent."""
        if key not in self._series:
            return np.full(np.shape(hours), np.nan)
        return self._series[key].values_at(hours)
