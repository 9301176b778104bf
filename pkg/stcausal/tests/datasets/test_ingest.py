"""
Tests for reading, gridding and writing the input tables.
"""
import logging
import os

import numpy as np
import pytest

from stcausal.datasets import (
    GridSpec,
    aggregate_to_cities,
    ingest_air_quality,
    ingest_meteorology,
    load_dataset,
    read_environment,
    read_sensor_metadata,
    write_air_quality,
    write_environment,
    write_sensor_metadata,
)
from stcausal.exceptions import (
    DuplicateTimestampError,
    EmptyRegionError,
    MalformedRowError,
    UnknownSensorError,
)
from stcausal.utils import get_data

START = np.datetime64("2015-03-01T00", "h").astype(np.int64)
HEADER = "sensor_id,timestamp,PM25,PM10,NO2,CO,O3,SO2\n"


@pytest.fixture
def sensors():
    return read_sensor_metadata(get_data("toy_sensors.csv"))


@pytest.fixture
def toy_grid():
    return GridSpec(
        lat_min=39.8, lat_max=40.6, lon_min=116.3, lon_max=117.3, rows=2, cols=2
    )


def write_table(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w") as output:
        output.write(text)
    return path


def test_read_sensor_metadata(sensors):
    """
    Make sure the sensor table is read with its locations.
    """
    assert sorted(sensors) == ["s1", "s2", "s3"]
    assert sensors["s1"].city_id == "c1"
    assert sensors["s3"].location == (40.5, 117.2)


def test_read_sensor_metadata_duplicate(tmpdir):
    path = write_table(
        tmpdir, "sensors.csv", "sensor_id,city_id,lat,lon\na,c,1,2\na,c,3,4\n"
    )
    with pytest.raises(MalformedRowError) as error:
        read_sensor_metadata(path)
    assert error.value.line_number == 3


def test_read_sensor_metadata_bad_latitude(tmpdir):
    path = write_table(tmpdir, "sensors.csv", "sensor_id,city_id,lat,lon\na,c,95,2\n")
    with pytest.raises(MalformedRowError):
        read_sensor_metadata(path)


def test_ingest_air_quality(sensors):
    """
    Each sensor gives one series per pollutant sorted by sensor then category, missing
    fields become NaN.
    """
    series = ingest_air_quality(get_data("toy_air_quality.csv"), sensors)
    assert len(series) == 18
    assert [(s.sensor_id, s.category) for s in series[:7]] == [
        ("s1", 1),
        ("s1", 2),
        ("s1", 3),
        ("s1", 4),
        ("s1", 5),
        ("s1", 6),
        ("s2", 1),
    ]
    s2_pm25 = series[6]
    assert s2_pm25.timestamps.tolist() == list(range(START, START + 6))
    assert np.isnan(s2_pm25.values[3])
    assert s2_pm25.values[4] == 67.5
    assert series[0].values.tolist() == [40.5, 43.5, 46.5, 49.5, 52.5, 55.5]


@pytest.mark.parametrize(
    "rows, error_type, line_number",
    [
        pytest.param(
            "s1,2015-03-01T00:00:00,1,2,3,4,5,6\ns1,2015-03-01T01:00:00,abc,2,3,4,5,6\n",
            MalformedRowError,
            3,
            id="not a number",
        ),
        pytest.param(
            "s1,2015-03-01T00:30:00,1,2,3,4,5,6\n",
            MalformedRowError,
            2,
            id="not on the hour",
        ),
        pytest.param(
            "s1,yesterday,1,2,3,4,5,6\n", MalformedRowError, 2, id="bad timestamp"
        ),
    ],
)
def test_ingest_malformed_rows(tmpdir, sensors, rows, error_type, line_number):
    """
    Make sure the line of a malformed row is reported.
    """
    path = write_table(tmpdir, "air.csv", HEADER + rows)
    with pytest.raises(error_type) as error:
        ingest_air_quality(path, sensors)
    assert error.value.line_number == line_number
    assert f"line {line_number}" in error.value.error_message


def test_ingest_bad_header(tmpdir, sensors):
    path = write_table(tmpdir, "air.csv", "sensor,timestamp,PM25\ns1,x,1\n")
    with pytest.raises(MalformedRowError) as error:
        ingest_air_quality(path, sensors)
    assert error.value.line_number == 1


def test_ingest_unknown_sensor(tmpdir, sensors):
    path = write_table(tmpdir, "air.csv", HEADER + "s9,2015-03-01T00:00:00,1,,,,,\n")
    with pytest.raises(UnknownSensorError, match="s9"):
        ingest_air_quality(path, sensors)


def test_ingest_duplicate_timestamp(tmpdir, sensors):
    rows = "s1,2015-03-01T00:00:00,1,,,,,\ns1,2015-03-01T00:00:00,2,,,,,\n"
    path = write_table(tmpdir, "air.csv", HEADER + rows)
    with pytest.raises(DuplicateTimestampError, match="line 3"):
        ingest_air_quality(path, sensors)


def test_ingest_missing_tokens(tmpdir, sensors):
    rows = "s1,2015-03-01T00:00:00,NA,null,NaN,,1.5,2\n"
    path = write_table(tmpdir, "air.csv", HEADER + rows)
    series = ingest_air_quality(path, sensors)
    assert [bool(np.isnan(s.values[0])) for s in series] == [
        True,
        True,
        True,
        True,
        False,
        False,
    ]


def test_ingest_missing_file(sensors):
    with pytest.raises(FileNotFoundError):
        ingest_air_quality("missing_file.csv", sensors)


def test_write_air_quality_round_trip(tmpdir, sensors):
    """
    Writing the series and reading them back gives identical readings.
    """
    series = ingest_air_quality(get_data("toy_air_quality.csv"), sensors)
    path = os.path.join(tmpdir, "out", "air.csv")
    write_air_quality(series, path)
    again = ingest_air_quality(path, sensors)
    assert len(again) == len(series)
    for before, after in zip(series, again):
        assert before.key == after.key
        np.testing.assert_array_equal(before.timestamps, after.timestamps)
        np.testing.assert_array_equal(before.values, after.values)
    # nothing is left behind by the atomic write
    assert os.listdir(os.path.join(tmpdir, "out")) == ["air.csv"]


def test_write_sensor_metadata_round_trip(tmpdir, sensors):
    path = os.path.join(tmpdir, "sensors.csv")
    write_sensor_metadata(sensors, path)
    assert read_sensor_metadata(path) == sensors


def test_grid_cells():
    """
    Points map to row major cells, the northern and eastern edges to the last band.
    """
    grid = GridSpec(lat_min=0, lat_max=3, lon_min=0, lon_max=3)
    cells = grid.cells_of(
        np.array([0.5, 0.5, 2.5, 3.0, 4.0]), np.array([0.5, 2.5, 0.5, 3.0, 0.0])
    )
    assert cells.tolist() == [0, 2, 6, 8, -1]
    assert grid.n_cells == 9


def test_grid_bad_box():
    with pytest.raises(ValueError):
        GridSpec(lat_min=1, lat_max=0, lon_min=0, lon_max=1)


def test_ingest_meteorology(toy_grid, caplog):
    """
    Cells with a station take its values, the others the region mean, and hours with no
    station in the region are dropped.
    """
    with caplog.at_level(logging.WARNING):
        meteo = ingest_meteorology(get_data("toy_meteorology.csv"), toy_grid)
    assert "1 timestamps" in caplog.text

    assert meteo.timestamps.tolist() == [START, START + 1]
    assert meteo.dimension == 20
    assert meteo.columns[:6] == ["c0_T", "c0_P", "c0_H", "c0_WS", "c0_WD", "c1_T"]
    first = meteo.vectors[0].reshape(4, 5)
    assert first[0].tolist() == [2.0, 1021.0, 40.0, 1.5, 90.0]
    assert first[1].tolist() == [1.5, 1020.0, 42.0, 2.0, 135.0]
    assert first[2].tolist() == [1.5, 1020.0, 42.0, 2.0, 135.0]
    assert first[3].tolist() == [1.0, 1019.0, 44.0, 2.5, 180.0]
    second = meteo.vectors[1].reshape(4, 5)
    assert np.all(second == np.array([2.5, 1021.5, 41.0, 1.0, 95.0]))


def test_ingest_meteorology_empty_region():
    grid = GridSpec(lat_min=0, lat_max=1, lon_min=0, lon_max=1)
    with pytest.raises(EmptyRegionError):
        ingest_meteorology(get_data("toy_meteorology.csv"), grid)


def test_environment_round_trip(tmpdir, toy_grid):
    meteo = ingest_meteorology(get_data("toy_meteorology.csv"), toy_grid)
    path = os.path.join(tmpdir, "environment.csv")
    write_environment(meteo, path)
    again = read_environment(path)
    assert again.columns == meteo.columns
    np.testing.assert_array_equal(again.timestamps, meteo.timestamps)
    np.testing.assert_allclose(again.vectors, meteo.vectors)


def test_meteo_at_missing_hours(toy_grid):
    meteo = ingest_meteorology(get_data("toy_meteorology.csv"), toy_grid)
    vectors = meteo.at(np.array([START + 1, START + 2]))
    assert not np.isnan(vectors[0]).any()
    assert np.isnan(vectors[1]).all()


def test_aggregate_to_cities(sensors):
    """
    The sensors of a city are averaged over the readings which exist at each hour.
    """
    series = ingest_air_quality(get_data("toy_air_quality.csv"), sensors)
    dataset = aggregate_to_cities(series, sensors)
    assert sorted(dataset.sensors) == ["c1", "c2"]
    assert dataset.sensors["c1"].latitude == pytest.approx(39.925)
    c1_pm25 = dataset.get(dataset.keys()[0])
    assert c1_pm25.key.label() == "PM25@c1"
    assert c1_pm25.values[0] == pytest.approx(48.0)
    # only s1 reported PM25 at 03:00
    assert c1_pm25.values[3] == pytest.approx(49.5)


def test_load_dataset(toy_grid):
    dataset = load_dataset(
        get_data("toy_air_quality.csv"),
        get_data("toy_sensors.csv"),
        get_data("toy_meteorology.csv"),
        grid=toy_grid,
    )
    assert dataset.categories == [1, 2, 3, 4, 5, 6]
    assert dataset.all_hours().size == 6
    assert dataset.meteorology.dimension == 20


def test_load_dataset_needs_grid():
    with pytest.raises(ValueError):
        load_dataset(
            get_data("toy_air_quality.csv"),
            get_data("toy_sensors.csv"),
            get_data("toy_meteorology.csv"),
        )
