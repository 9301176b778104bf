"""
Readers and writers for the air-quality, sensor metadata and meteorology tables.
"""
import logging
import math
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import Field, PositiveInt, ValidationError, root_validator

from stcausal.common_structures import (
    METEO_MEASUREMENTS,
    POLLUTANTS,
    ResultsConfig,
)
from stcausal.datasets.series import (
    AirQualityDataset,
    MeteoSeries,
    PollutantSeries,
    SensorMeta,
    epoch_hours_to_iso,
)
from stcausal.exceptions import (
    DuplicateTimestampError,
    EmptyRegionError,
    MalformedRowError,
    UnknownSensorError,
)
from stcausal.utils import atomic_write_text

logger = logging.getLogger(__name__)

AIR_QUALITY_COLUMNS = ["sensor_id", "timestamp", *POLLUTANTS]
SENSOR_COLUMNS = ["sensor_id", "city_id", "lat", "lon"]
METEO_COLUMNS = ["station_id", "lat", "lon", "timestamp", *METEO_MEASUREMENTS]

MISSING_TOKENS = {"", "NA", "NaN", "nan", "null"}
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"


class GridSpec(ResultsConfig):
    """
    The bounding box of a study region split into ``rows x cols`` equal cells,
    row 0 is the southern band and column 0 the western band.
    """

    lat_min: float = Field(..., description="The southern edge in degrees.")
    lat_max: float = Field(..., description="The northern edge in degrees.")
    lon_min: float = Field(..., description="The western edge in degrees.")
    lon_max: float = Field(..., description="The eastern edge in degrees.")
    rows: PositiveInt = Field(3, description="The number of latitude bands.")
    cols: PositiveInt = Field(3, description="The number of longitude bands.")

    @root_validator(skip_on_failure=True)
    def _check_box(cls, values):
        if values["lat_min"] >= values["lat_max"]:
            raise ValueError("lat_min must be smaller than lat_max.")
        if values["lon_min"] >= values["lon_max"]:
            raise ValueError("lon_min must be smaller than lon_max.")
        return values

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cells_of(self, latitudes: np.ndarray, longitudes: np.ndarray) -> np.ndarray:
        """
        The row major cell index of each point, -1 for points outside of the box.
        Points on the northern or eastern edge belong to the last band.
        """
        latitudes = np.asarray(latitudes, dtype=float)
        longitudes = np.asarray(longitudes, dtype=float)
        inside = (
            (latitudes >= self.lat_min)
            & (latitudes <= self.lat_max)
            & (longitudes >= self.lon_min)
            & (longitudes <= self.lon_max)
        )
        row = np.floor(
            (latitudes - self.lat_min) / (self.lat_max - self.lat_min) * self.rows
        )
        col = np.floor(
            (longitudes - self.lon_min) / (self.lon_max - self.lon_min) * self.cols
        )
        row = np.clip(np.nan_to_num(row), 0, self.rows - 1).astype(int)
        col = np.clip(np.nan_to_num(col), 0, self.cols - 1).astype(int)
        return np.where(inside, row * self.cols + col, -1)


def _read_table(path: str, columns: List[str]) -> pd.DataFrame:
    """
    Read a csv file as strings and check its header.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"The file {path} could not be found.")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise MalformedRowError(
            f"{path} is empty, expected the header {','.join(columns)}.", 1
        )
    except pd.errors.ParserError as error:
        raise MalformedRowError(f"{path} could not be parsed: {error}")

    header = [str(c).strip() for c in frame.columns]
    if header != columns:
        raise MalformedRowError(
            f"{path} has the header {','.join(header)} but {','.join(columns)} was expected.",
            1,
        )
    frame.columns = header
    return frame


def _line_number(frame: pd.DataFrame, row: int) -> int:
    # one for the header and one because lines count from one
    return int(frame.index[row]) + 2


def _parse_floats(frame: pd.DataFrame, column: str) -> np.ndarray:
    """
    Parse a text column into floats with python's exact parser, missing tokens give NaN.
    """
    parsed = np.empty(len(frame), dtype=float)
    for row, text in enumerate(frame[column].tolist()):
        text = text.strip()
        if text in MISSING_TOKENS:
            parsed[row] = np.nan
            continue
        try:
            parsed[row] = float(text)
        except ValueError:
            raise MalformedRowError(
                f"the {column} value `{text}` is not a number.",
                _line_number(frame, row),
            )
    return parsed


def _parse_hours(frame: pd.DataFrame, column: str = "timestamp") -> np.ndarray:
    """
    Parse the hourly ISO-8601 timestamps of a table into epoch hours.
    """
    parsed = pd.to_datetime(
        frame[column].str.strip(), format=TIMESTAMP_FORMAT, errors="coerce"
    )
    bad = parsed.isna().to_numpy()
    if bad.any():
        row = int(np.argmax(bad))
        raise MalformedRowError(
            f"the timestamp `{frame[column].iloc[row]}` is not of the form YYYY-MM-DDTHH:00:00.",
            _line_number(frame, row),
        )
    not_hourly = ((parsed.dt.minute != 0) | (parsed.dt.second != 0)).to_numpy()
    if not_hourly.any():
        row = int(np.argmax(not_hourly))
        raise MalformedRowError(
            f"the timestamp `{frame[column].iloc[row]}` is not on the hour.",
            _line_number(frame, row),
        )
    return parsed.values.astype("datetime64[h]").astype(np.int64)


def read_sensor_metadata(path: str) -> Dict[str, SensorMeta]:
    """
    Read the ``sensor_id,city_id,lat,lon`` table.

    Raises:
        MalformedRowError: If a row can not be parsed or a sensor id is repeated.
    """
    frame = _read_table(path, SENSOR_COLUMNS)
    latitudes = _parse_floats(frame, "lat")
    longitudes = _parse_floats(frame, "lon")
    sensors = {}
    for row, (sensor_id, city_id) in enumerate(
        zip(frame["sensor_id"].str.strip(), frame["city_id"].str.strip())
    ):
        if sensor_id in sensors:
            raise MalformedRowError(
                f"the sensor {sensor_id} is listed more than once.",
                _line_number(frame, row),
            )
        try:
            sensors[sensor_id] = SensorMeta(
                sensor_id=sensor_id,
                city_id=city_id,
                latitude=latitudes[row],
                longitude=longitudes[row],
            )
        except ValidationError as error:
            raise MalformedRowError(str(error), _line_number(frame, row))
    return sensors


def ingest_air_quality(
    path: str, metadata: Dict[str, SensorMeta]
) -> List[PollutantSeries]:
    """
    Read the hourly air-quality table into one series per (sensor, category).

    Parameters:
        path: The csv file with the header ``sensor_id,timestamp,PM25,PM10,NO2,CO,O3,SO2``.
        metadata: The known sensors keyed by id.

    Returns:
        The series sorted by sensor id then category, rows are sorted by time.

    Raises:
        MalformedRowError: When a row can not be parsed, the line number is reported.
        UnknownSensorError: When a row refers to a sensor missing from the metadata.
        DuplicateTimestampError: When a sensor reports the same timestamp twice.
    """
    frame = _read_table(path, AIR_QUALITY_COLUMNS)
    if frame.empty:
        logger.info(f"{path} has no readings.")
        return []

    frame["sensor_id"] = frame["sensor_id"].str.strip()
    hours = _parse_hours(frame)
    readings = {name: _parse_floats(frame, name) for name in POLLUTANTS}

    unknown = ~frame["sensor_id"].isin(list(metadata)).to_numpy()
    if unknown.any():
        row = int(np.argmax(unknown))
        raise UnknownSensorError(
            f"line {_line_number(frame, row)}: the sensor "
            f"{frame['sensor_id'].iloc[row]} is not in the sensor metadata."
        )

    keyed = pd.DataFrame({"sensor_id": frame["sensor_id"].to_numpy(), "hour": hours})
    duplicated = keyed.duplicated(["sensor_id", "hour"]).to_numpy()
    if duplicated.any():
        row = int(np.argmax(duplicated))
        raise DuplicateTimestampError(
            f"line {_line_number(frame, row)}: the sensor "
            f"{keyed['sensor_id'].iloc[row]} reports "
            f"{frame['timestamp'].iloc[row]} more than once."
        )

    series = []
    for sensor_id in sorted(keyed["sensor_id"].unique()):
        rows = np.flatnonzero(keyed["sensor_id"].to_numpy() == sensor_id)
        rows = rows[np.argsort(hours[rows], kind="stable")]
        for category, name in enumerate(POLLUTANTS, start=1):
            series.append(
                PollutantSeries(
                    sensor_id=sensor_id,
                    category=category,
                    timestamps=hours[rows],
                    values=readings[name][rows],
                )
            )
    logger.info(
        f"ingested {len(frame)} rows from {path} into {len(series)} pollutant series."
    )
    return series


def write_air_quality(series: Sequence[PollutantSeries], path: str) -> None:
    """
    Write pollutant series back to the air-quality table format, sorted by sensor then time.
    Values are written with the shortest exact representation so that reading the file back
    gives bitwise identical series; missing readings are empty fields.
    """
    table: Dict[str, Dict[int, List[str]]] = {}
    for item in series:
        sensor = table.setdefault(item.sensor_id, {})
        for hour, value in zip(item.timestamps.tolist(), item.values.tolist()):
            row = sensor.setdefault(hour, [""] * len(POLLUTANTS))
            row[item.category - 1] = "" if math.isnan(value) else repr(value)

    lines = [",".join(AIR_QUALITY_COLUMNS)]
    for sensor_id in sorted(table):
        hours = sorted(table[sensor_id])
        for hour, stamp in zip(hours, epoch_hours_to_iso(hours)):
            lines.append(",".join([sensor_id, stamp, *table[sensor_id][hour]]))

    atomic_write_text(path, "\n".join(lines) + "\n")


def write_sensor_metadata(sensors: Dict[str, SensorMeta], path: str) -> None:
    """Write the sensor metadata table, sorted by sensor id."""
    lines = [",".join(SENSOR_COLUMNS)]
    for sensor_id in sorted(sensors):
        sensor = sensors[sensor_id]
        lines.append(
            f"{sensor_id},{sensor.city_id},{sensor.latitude!r},{sensor.longitude!r}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_environment(meteorology: MeteoSeries, path: str) -> None:
    """Write the gridded environmental vectors, one row per timestamp."""
    atomic_write_text(path, meteorology.to_frame().to_csv(index=False))


def read_environment(path: str) -> MeteoSeries:
    """
    Read back the gridded environmental vectors written by :func:`write_environment`.

    Raises:
        MalformedRowError: When a row can not be parsed.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if "timestamp" not in frame.columns:
        raise MalformedRowError(f"{path} has no timestamp column.", 1)
    columns = [c for c in frame.columns if c != "timestamp"]
    vectors = np.column_stack([_parse_floats(frame, c) for c in columns])
    return MeteoSeries(
        timestamps=_parse_hours(frame), vectors=vectors, columns=columns
    )


def ingest_meteorology(path: str, grid: GridSpec) -> MeteoSeries:
    """
    Average station meteorology onto the grid cells of a region.

    Per timestamp each cell carries the mean of the stations that fall in it, cells without a
    station carry the region wide mean. Timestamps with no station in the region are dropped.

    Parameters:
        path: The csv file with the header ``station_id,lat,lon,timestamp,T,P,H,WS,WD``.
        grid: The region and its cell layout.

    Raises:
        MalformedRowError: When a row can not be parsed.
        EmptyRegionError: When no station falls in the region at any timestamp.
    """
    frame = _read_table(path, METEO_COLUMNS)
    latitudes = _parse_floats(frame, "lat")
    longitudes = _parse_floats(frame, "lon")
    hours = _parse_hours(frame)
    measurements = np.column_stack(
        [_parse_floats(frame, name) for name in METEO_MEASUREMENTS]
    )

    cells = grid.cells_of(latitudes, longitudes)
    inside = cells >= 0
    if not inside.any():
        raise EmptyRegionError(
            f"none of the stations in {path} fall inside the grid region {grid.dict()}."
        )

    stations = pd.DataFrame(measurements[inside], columns=list(METEO_MEASUREMENTS))
    stations["hour"] = hours[inside]
    stations["cell"] = cells[inside]

    dropped = np.setdiff1d(np.unique(hours), stations["hour"].unique()).size
    if dropped:
        logger.warning(
            f"{dropped} timestamps in {path} have no station inside the region and were dropped."
        )

    region_mean = stations.groupby("hour")[list(METEO_MEASUREMENTS)].mean()
    cell_mean = stations.groupby(["hour", "cell"])[list(METEO_MEASUREMENTS)].mean()

    timestamps = region_mean.index.to_numpy(dtype=np.int64)
    n_measurements = len(METEO_MEASUREMENTS)
    # start every cell from the region mean then overwrite the cells with stations
    vectors = np.repeat(
        region_mean.to_numpy()[:, np.newaxis, :], grid.n_cells, axis=1
    )
    hour_index = np.searchsorted(timestamps, cell_mean.index.get_level_values("hour"))
    cell_index = cell_mean.index.get_level_values("cell").to_numpy()
    cell_values = cell_mean.to_numpy()
    filled = np.where(
        np.isnan(cell_values), vectors[hour_index, cell_index], cell_values
    )
    vectors[hour_index, cell_index] = filled

    columns = [
        f"c{cell}_{name}" for cell in range(grid.n_cells) for name in METEO_MEASUREMENTS
    ]
    logger.info(
        f"averaged {int(inside.sum())} station readings onto {grid.n_cells} cells "
        f"for {len(timestamps)} timestamps."
    )
    return MeteoSeries(
        timestamps=timestamps,
        vectors=vectors.reshape(len(timestamps), grid.n_cells * n_measurements),
        columns=columns,
    )


def aggregate_to_cities(
    series: Sequence[PollutantSeries], metadata: Dict[str, SensorMeta]
) -> AirQualityDataset:
    """
    Average the sensors of each city into one pseudo sensor per city.

    The pseudo sensor's id is the city id and its location is the mean location of its
    sensors; per timestamp the reading is the mean of the sensors which reported.
    """
    cities: Dict[str, List[str]] = {}
    for sensor in metadata.values():
        cities.setdefault(sensor.city_id, []).append(sensor.sensor_id)

    city_series = []
    for city_id in sorted(cities):
        members = set(cities[city_id])
        for category in sorted({s.category for s in series}):
            parts = [
                pd.Series(s.values, index=s.timestamps)
                for s in series
                if s.sensor_id in members and s.category == category
            ]
            if not parts:
                continue
            averaged = pd.concat(parts, axis=1).sort_index().mean(axis=1)
            city_series.append(
                PollutantSeries(
                    sensor_id=city_id,
                    category=category,
                    timestamps=averaged.index.to_numpy(dtype=np.int64),
                    values=averaged.to_numpy(dtype=float),
                )
            )

    city_meta = {}
    for city_id, members in cities.items():
        sensors = [metadata[m] for m in members]
        city_meta[city_id] = SensorMeta(
            sensor_id=city_id,
            city_id=city_id,
            latitude=float(np.mean([s.latitude for s in sensors])),
            longitude=float(np.mean([s.longitude for s in sensors])),
        )
    logger.info(f"aggregated {len(metadata)} sensors into {len(city_meta)} cities.")
    return AirQualityDataset(sensors=city_meta, series=city_series)


def load_dataset(
    air_quality_path: str,
    sensors_path: str,
    meteorology_path: Optional[str] = None,
    grid: Optional[GridSpec] = None,
    city_level: bool = False,
) -> AirQualityDataset:
    """
    Load a complete study region from its csv tables.

    Parameters:
        air_quality_path: The hourly air-quality table.
        sensors_path: The sensor metadata table.
        meteorology_path: The optional station meteorology table.
        grid: The grid to average the meteorology onto, required with a meteorology table.
        city_level: If the sensors should be averaged into one pseudo sensor per city.
    """
    metadata = read_sensor_metadata(sensors_path)
    series = ingest_air_quality(air_quality_path, metadata)
    if city_level:
        dataset = aggregate_to_cities(series, metadata)
    else:
        used = {s.sensor_id for s in series}
        dataset = AirQualityDataset(
            sensors={k: v for k, v in metadata.items() if k in used}, series=series
        )

    if meteorology_path is not None:
        if grid is None:
            raise ValueError("A grid is required to average the meteorology.")
        meteorology = ingest_meteorology(meteorology_path, grid)
        dataset = dataset.copy(update={"meteorology": meteorology})
    return dataset
