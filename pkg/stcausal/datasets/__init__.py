from stcausal.datasets.ingest import (
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
from stcausal.datasets.series import (
    AirQualityDataset,
    DiffPanel,
    DiffSeries,
    MeteoSeries,
    PollutantSeries,
    SensorMeta,
    SymbolicPollutionDatabase,
)
from stcausal.datasets.transforms import (
    SeasonalSplit,
    diff_normalize,
    haversine_km,
    normality_check,
    sax_discretize,
    split_seasonal,
)

__all__ = [
    "AirQualityDataset",
    "DiffPanel",
    "DiffSeries",
    "GridSpec",
    "MeteoSeries",
    "PollutantSeries",
    "SeasonalSplit",
    "SensorMeta",
    "SymbolicPollutionDatabase",
    "aggregate_to_cities",
    "diff_normalize",
    "haversine_km",
    "ingest_air_quality",
    "ingest_meteorology",
    "load_dataset",
    "normality_check",
    "read_environment",
    "read_sensor_metadata",
    "sax_discretize",
    "split_seasonal",
    "write_air_quality",
    "write_environment",
    "write_sensor_metadata",
]
