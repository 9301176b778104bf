"""
The pipeline configuration and the commands which run each stage, every stage reads
the artifacts of the previous ones from the output directory and writes its own next
to them.
"""
import glob
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import (
    Field,
    NonNegativeInt,
    PositiveInt,
    ValidationError,
    confloat,
    conint,
    root_validator,
    validator,
)
from typing_extensions import Literal

from stcausal.caching import load_candidate_set, load_model, load_pattern_set
from stcausal.causal.diagnostics import pca_project
from stcausal.causal.em import CausalModel, EMSettings
from stcausal.causal.pathway import expand_pathway
from stcausal.causal.refine import held_out_accuracy
from stcausal.common_structures import (
    POLLUTANTS,
    SeriesKey,
    SettingsConfig,
    category_index,
    pollutant_name,
)
from stcausal.datasets.ingest import (
    GridSpec,
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
    PollutantSeries,
    epoch_hours_to_iso,
)
from stcausal.datasets.transforms import (
    SEASONS,
    SeasonalSplit,
    diff_normalize,
    split_seasonal,
)
from stcausal.exceptions import (
    ConfigurationError,
    DegenerateSeriesError,
    EmptyDatabaseError,
)
from stcausal.matching.matching import CandidateSet, CorrRule
from stcausal.patterns.mining import PatternSet
from stcausal.serializers import deserialize, serialize
from stcausal.synthetic.benchmark import BenchmarkSettings, PgSettings, run_benchmark
from stcausal.synthetic.generator import SyntheticSpec
from stcausal.utils import atomic_write_text
from stcausal.validators import check_fraction, check_probability
from stcausal.workflow import (
    CandidateSelection,
    ModelTraining,
    PatternMining,
    TrainingJob,
    TrainingOutcome,
    in_range_candidates,
)

logger = logging.getLogger(__name__)

Season = Literal["spring", "summer", "autumn", "winter"]

#: The margin in degrees around the sensors when the grid is derived from them.
GRID_MARGIN = 0.01


class PipelineConfig(SettingsConfig):
    """
    Every parameter of a pipeline run. It can be loaded from a flat ``key = value`` file
    or from json and yaml, and single keys can be overridden afterwards.
    """

    air_quality: Optional[str] = Field(
        None, description="The hourly air-quality table."
    )
    sensors: Optional[str] = Field(None, description="The sensor metadata table.")
    meteorology: Optional[str] = Field(
        None, description="The station meteorology table, needed for confounders."
    )
    grid: Optional[Tuple[float, float, float, float]] = Field(
        None,
        description="The region as (lat_min, lat_max, lon_min, lon_max), the bounding "
        "box of the sensors by default.",
    )
    grid_rows: PositiveInt = Field(3, description="The latitude bands of the grid.")
    grid_cols: PositiveInt = Field(3, description="The longitude bands of the grid.")
    city_level: bool = Field(
        False, description="Average the sensors of each city into one pseudo sensor."
    )
    output_dir: str = Field(
        "stcausal-output", description="Where artifacts are written."
    )

    alphabet: conint(ge=2, le=10) = Field(
        5, description="The number a of symbolic levels."
    )
    segment_minutes: PositiveInt = Field(60, description="The symbolic segment length.")
    sigma: float = Field(0.1, description="The relative minimum support of a pattern.")
    delta_t: PositiveInt = Field(
        60, description="The pattern time constraint in minutes."
    )
    max_distance_km: confloat(gt=0) = Field(
        200.0, description="The distance gate between a target and its candidates."
    )
    min_corr: float = Field(0.5, description="The pattern correlation gate.")
    corr_rule: CorrRule = Field(
        "harmonic", description="How the correlation is formed."
    )
    top_x: Optional[PositiveInt] = Field(None, description="The most candidates kept.")
    max_lag: PositiveInt = Field(3, description="The lag depth L in hours.")
    categories: List[str] = Field(
        list(POLLUTANTS), description="The M pollutant categories used."
    )
    targets: List[str] = Field(["PM25"], description="The pollutants to model.")
    n_clusters: List[PositiveInt] = Field([3], description="The K values swept.")
    n_neighbors: List[NonNegativeInt] = Field([3], description="The N values swept.")
    min_score: Optional[float] = Field(
        1.0, description="Only neighbours with a gc score above this are kept."
    )
    seed: int = Field(0, description="The seed of every random choice.")
    test_days: NonNegativeInt = Field(
        15, description="The days held out at the end of every season."
    )
    seasons: Optional[List[Season]] = Field(
        None, description="The seasons to train and evaluate, all of them by default."
    )
    no_patterns: bool = Field(
        False, description="Skip pattern mining, every in-range sensor is a candidate."
    )
    no_confounders: bool = Field(False, description="Train a single cluster.")
    pi_update: Literal["posterior", "normalized", "scaled"] = Field(
        "normalized", description="The per-timestamp prior update of EM."
    )
    assignment: Literal["soft", "hard"] = Field(
        "soft", description="Fit the clusters with soft or hard assignments."
    )
    max_em_iterations: PositiveInt = Field(10, description="The EM iterations bound.")
    max_outer_iterations: PositiveInt = Field(
        10, description="The learning and reconstruction rounds bound."
    )
    pathway_hops: PositiveInt = Field(3, description="The pathway expansion depth.")
    synthetic: SyntheticSpec = Field(
        default_factory=SyntheticSpec, description="The benchmark system."
    )
    bench_seeds: List[int] = Field([0], description="The benchmark seeds.")
    granger_alpha: float = Field(0.05, description="The Granger test level.")
    lasso_penalty: Optional[float] = Field(
        None, description="The Lasso penalty, None picks it by cross validation."
    )
    lasso_one_standard_error: bool = Field(
        True, description="Apply the one standard error rule to the Lasso penalty."
    )
    record_timings: bool = Field(False, description="Record the benchmark runtimes.")

    _check_sigma = validator("sigma", allow_reuse=True)(check_fraction)
    _check_corr = validator("min_corr", "granger_alpha", allow_reuse=True)(
        check_probability
    )

    @validator("categories", "targets", each_item=True)
    def _check_pollutant(cls, pollutant):
        return pollutant_name(category_index(pollutant))

    @validator("n_clusters", "n_neighbors", "bench_seeds", pre=True)
    def _as_list(cls, values):
        if isinstance(values, (int, str)):
            values = [values]
        return values

    @validator("n_clusters", "n_neighbors", "bench_seeds")
    def _sorted_unique(cls, values):
        if not values:
            raise ValueError("At least one value is needed.")
        return sorted(set(values))

    @validator("grid")
    def _check_grid(cls, grid):
        if grid is not None and (grid[0] >= grid[1] or grid[2] >= grid[3]):
            raise ValueError(
                "The grid (lat_min, lat_max, lon_min, lon_max) needs min < max."
            )
        return grid

    @root_validator(skip_on_failure=True)
    def _check_flags(cls, values):
        if values["no_confounders"]:
            values["n_clusters"] = [1]
        missing = set(values["targets"]) - set(values["categories"])
        if missing:
            raise ValueError(
                f"The targets {sorted(missing)} are not in the categories."
            )
        return values

    @classmethod
    def from_file(
        cls, file_name: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
    ) -> "PipelineConfig":
        """
        Build the configuration from a file then apply the overrides, a dotted key such
        as ``synthetic.n_series`` sets a nested value.

        Raises:
            ConfigurationError: If the file is missing or a value is invalid.
        """
        settings: Dict[str, Any] = {}
        if file_name is not None:
            try:
                settings = deserialize(file_name) or {}
            except FileNotFoundError as error:
                raise ConfigurationError(str(error)) from error
            except ValueError as error:
                raise ConfigurationError(f"{file_name}: {error}") from error
        for key, value in (overrides or {}).items():
            target = settings
            *parents, leaf = key.split(".")
            for parent in parents:
                target = target.setdefault(parent, {})
            target[leaf] = value
        try:
            return cls(**settings)
        except ValidationError as error:
            raise ConfigurationError(f"invalid configuration: {error}") from error

    def output(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    @property
    def category_indices(self) -> List[int]:
        return [category_index(c) for c in self.categories]

    @property
    def target_indices(self) -> List[int]:
        return [category_index(c) for c in self.targets]

    def grid_spec(self, dataset: AirQualityDataset) -> GridSpec:
        """The configured grid, or the sensor bounding box with a small margin."""
        if self.grid is not None:
            lat_min, lat_max, lon_min, lon_max = self.grid
        else:
            latitudes = [s.latitude for s in dataset.sensors.values()]
            longitudes = [s.longitude for s in dataset.sensors.values()]
            lat_min, lat_max = (
                min(latitudes) - GRID_MARGIN,
                max(latitudes) + GRID_MARGIN,
            )
            lon_min, lon_max = (
                min(longitudes) - GRID_MARGIN,
                max(longitudes) + GRID_MARGIN,
            )
        return GridSpec(
            lat_min=lat_min,
            lat_max=lat_max,
            lon_min=lon_min,
            lon_max=lon_max,
            rows=self.grid_rows,
            cols=self.grid_cols,
        )

    def em_settings(self) -> EMSettings:
        return EMSettings(
            max_iterations=self.max_em_iterations,
            pi_update=self.pi_update,
            assignment=self.assignment,
        )

    def variant(self, **flags: bool) -> "PipelineConfig":
        """A validated copy with some flags changed."""
        return PipelineConfig(**{**self.dict(), **flags})


def _artifact_name(key: SeriesKey) -> str:
    return f"{key.label()}.json"


def _write_csv(frame: pd.DataFrame, file_name: str) -> str:
    return atomic_write_text(file_name, frame.to_csv(index=False, float_format="%.6f"))


def _has_readings(series: PollutantSeries) -> bool:
    return bool(np.any(~np.isnan(series.values)))


def cmd_ingest(config: PipelineConfig, verbose: bool = False) -> str:
    """
    Read the raw tables and write the canonical air-quality, sensor and gridded
    environment tables to ``ingest/``.
    """
    if config.air_quality is None or config.sensors is None:
        raise ConfigurationError(
            "the air_quality and sensors tables must be configured."
        )
    try:
        dataset = load_dataset(
            config.air_quality, config.sensors, city_level=config.city_level
        )
    except FileNotFoundError as error:
        raise ConfigurationError(str(error)) from error
    if config.meteorology is not None:
        meteorology = ingest_meteorology(config.meteorology, config.grid_spec(dataset))
        dataset = dataset.copy(update={"meteorology": meteorology})

    write_air_quality(dataset.series, config.output("ingest", "air_quality.csv"))
    write_sensor_metadata(dataset.sensors, config.output("ingest", "sensors.csv"))
    if dataset.meteorology is not None:
        write_environment(
            dataset.meteorology, config.output("ingest", "environment.csv")
        )

    hours = dataset.all_hours()
    summary = {
        "n_sensors": len(dataset.sensors),
        "n_series": len(dataset.series),
        "n_readings": int(sum(int((~np.isnan(s.values)).sum()) for s in dataset)),
        "first_hour": epoch_hours_to_iso(hours[:1])[0] if hours.size else None,
        "last_hour": epoch_hours_to_iso(hours[-1:])[0] if hours.size else None,
        "environment_dimension": dataset.meteorology.dimension
        if dataset.meteorology is not None
        else 0,
    }
    serialize(summary, config.output("ingest", "summary.json"))
    return (
        f"ingested {summary['n_readings']} readings "
        f"from {summary['n_sensors']} sensors "
        f"into {summary['n_series']} series"
    )


def load_ingested(config: PipelineConfig) -> AirQualityDataset:
    """
    Read back the canonical tables written by the ingest command.

    Raises:
        ConfigurationError: If the dataset has not been ingested.
    """
    air_quality = config.output("ingest", "air_quality.csv")
    sensors = config.output("ingest", "sensors.csv")
    if not (os.path.exists(air_quality) and os.path.exists(sensors)):
        raise ConfigurationError(
            f"there is no ingested dataset in {config.output('ingest')}, "
            "run ingest first."
        )
    metadata = read_sensor_metadata(sensors)
    series = ingest_air_quality(air_quality, metadata)
    environment = config.output("ingest", "environment.csv")
    meteorology = read_environment(environment) if os.path.exists(environment) else None
    return AirQualityDataset(sensors=metadata, series=series, meteorology=meteorology)


def build_diffs(dataset: AirQualityDataset, categories: Sequence[int]) -> DiffPanel:
    """Difference every series of the categories, skipping those which can not be."""
    diffs = []
    for series in dataset:
        if series.category not in categories:
            continue
        try:
            diffs.append(diff_normalize(series))
        except DegenerateSeriesError as error:
            logger.info(f"skipping {series.key.label()}: {error.raw_message}")
    return DiffPanel(diffs)


def seasonal_splits(
    config: PipelineConfig, dataset: AirQualityDataset
) -> Dict[str, SeasonalSplit]:
    splits = split_seasonal(
        dataset.all_hours(), config.test_days, guard_hours=config.max_lag
    )
    if config.seasons is not None:
        splits = {s: split for s, split in splits.items() if s in config.seasons}
    if not splits:
        raise ConfigurationError("none of the selected seasons are in the dataset.")
    return splits


def load_patterns(config: PipelineConfig) -> Dict[SeriesKey, PatternSet]:
    patterns = {}
    for file_name in sorted(glob.glob(config.output("patterns", "*.json"))):
        pattern_set = load_pattern_set(file_name)
        patterns[pattern_set.key] = pattern_set
    if not patterns:
        raise ConfigurationError(
            f"there are no pattern sets in {config.output('patterns')}, run mine first."
        )
    return patterns


def target_keys(config: PipelineConfig, dataset: AirQualityDataset) -> List[SeriesKey]:
    return [
        series.key
        for series in dataset
        if series.category in config.target_indices and _has_readings(series)
    ]


def cmd_mine(config: PipelineConfig, verbose: bool = False) -> str:
    """
    Mine the frequent evolving patterns of every series with readings.

    Raises:
        EmptyDatabaseError: If no series has readings.
    """
    dataset = load_ingested(config)
    series = [
        s for s in dataset if s.category in config.category_indices and _has_readings(s)
    ]
    if not series:
        raise EmptyDatabaseError("the ingested dataset has no readings to mine.")
    stage = PatternMining(
        alphabet=config.alphabet,
        segment_minutes=config.segment_minutes,
        sigma=config.sigma,
        delta_t=config.delta_t,
    )
    pattern_sets = [p for p in stage.apply(series, verbose=verbose) if p is not None]
    if not pattern_sets:
        raise EmptyDatabaseError("none of the series could be discretized.")
    for pattern_set in pattern_sets:
        serialize(
            pattern_set.to_document(),
            config.output("patterns", _artifact_name(pattern_set.key)),
        )
    total = sum(len(p) for p in pattern_sets)
    return f"mined {total} patterns from {len(pattern_sets)} series"


def cmd_candidates(config: PipelineConfig, verbose: bool = False) -> str:
    """Select and rank the candidate causers of every target series."""
    dataset = load_ingested(config)
    patterns = load_patterns(config)
    targets = [key for key in target_keys(config, dataset) if key in patterns]
    stage = CandidateSelection(
        patterns=patterns,
        sensors=dataset.sensors,
        max_distance_km=config.max_distance_km,
        min_corr=config.min_corr,
        max_lag=config.max_lag,
        top_x=config.top_x,
        corr_rule=config.corr_rule,
        categories=config.category_indices,
    )
    candidate_sets = stage.apply(targets, verbose=verbose)
    for candidate_set in candidate_sets:
        serialize(
            candidate_set.to_document(),
            config.output("candidates", _artifact_name(candidate_set.target)),
        )
    n_candidates = sum(len(c) for c in candidate_sets)
    return (
        f"selected {n_candidates} candidate causers "
        f"for {len(candidate_sets)} targets"
    )


def _candidates_for(
    config: PipelineConfig, dataset: AirQualityDataset, target: SeriesKey
) -> CandidateSet:
    if config.no_patterns:
        return in_range_candidates(target, dataset.sensors, config.max_distance_km)
    file_name = config.output("candidates", _artifact_name(target))
    if not os.path.exists(file_name):
        raise ConfigurationError(
            f"there are no candidates for {target.label()} in {file_name}, "
            "run candidates first."
        )
    return load_candidate_set(file_name)


def train_models(
    config: PipelineConfig,
    dataset: AirQualityDataset,
    diffs: DiffPanel,
    splits: Dict[str, SeasonalSplit],
    verbose: bool = False,
) -> List[TrainingOutcome]:
    """
    Train every target in every season.

    Raises:
        ConfigurationError: If an artifact or the meteorology a run needs is missing.
        StCausalException: The first training failure, naming its target and season.
    """
    if max(config.n_clusters) > 1 and dataset.meteorology is None:
        raise ConfigurationError(
            "confounder clusters need meteorology, configure it or set no_confounders."
        )
    patterns = None if config.no_patterns else load_patterns(config)
    targets = [key for key in target_keys(config, dataset) if key in diffs]
    jobs = [
        TrainingJob(
            season=season,
            target=target,
            train_hours=split.train_hours,
            candidates=_candidates_for(config, dataset, target),
        )
        for season, split in splits.items()
        for target in targets
    ]
    stage = ModelTraining(
        diffs=diffs,
        series={key: dataset.get(key) for key in targets},
        meteo=dataset.meteorology if max(config.n_clusters) > 1 else None,
        patterns=patterns,
        cluster_grid=config.n_clusters,
        neighbor_grid=config.n_neighbors,
        max_lag=config.max_lag,
        local_categories=[
            c for c in config.category_indices if c in diffs.categories()
        ],
        min_score=config.min_score,
        seed=config.seed,
        em_settings=config.em_settings(),
        max_outer_iterations=config.max_outer_iterations,
    )
    outcomes = stage.apply(jobs, verbose=verbose)
    for outcome in outcomes:
        if outcome.error is not None:
            raise outcome.error
    return outcomes


def _prepare(
    config: PipelineConfig,
) -> Tuple[AirQualityDataset, DiffPanel, Dict[str, SeasonalSplit]]:
    dataset = load_ingested(config)
    diffs = build_diffs(dataset, config.category_indices)
    return dataset, diffs, seasonal_splits(config, dataset)


def cmd_train(config: PipelineConfig, verbose: bool = False) -> str:
    """
    Train the causal model of every target per season, writing the models and the
    table of the swept K and N.
    """
    dataset, diffs, splits = _prepare(config)
    outcomes = train_models(config, dataset, diffs, splits, verbose=verbose)
    for season in splits:
        rows = []
        for outcome in outcomes:
            if outcome.season != season:
                continue
            serialize(
                outcome.model.to_document(),
                config.output("models", season, _artifact_name(outcome.target)),
            )
            for entry in outcome.sweep:
                rows.append(
                    {
                        "season": entry.season,
                        "target": entry.target,
                        "K": entry.n_clusters,
                        "N": entry.n_neighbors,
                        "accuracy": entry.accuracy,
                        "n_validation": entry.n_validation,
                        "selected": outcome.model.n_clusters == entry.n_clusters
                        and outcome.model.n_neighbors == entry.n_neighbors,
                        "status": entry.status,
                    }
                )
        _write_csv(
            pd.DataFrame(
                rows,
                columns=[
                    "season",
                    "target",
                    "K",
                    "N",
                    "accuracy",
                    "n_validation",
                    "selected",
                    "status",
                ],
            ),
            config.output("models", season, "selection.csv"),
        )
    return f"trained {len(outcomes)} models over {len(splits)} seasons"


def load_models(config: PipelineConfig, season: str) -> Dict[SeriesKey, CausalModel]:
    models = {}
    for file_name in sorted(glob.glob(config.output("models", season, "*.json"))):
        model = load_model(file_name)
        models[model.target] = model
    if not models:
        raise ConfigurationError(
            f"there are no models in {config.output('models', season)}, "
            "run train first."
        )
    return models


def _default_season(config: PipelineConfig) -> str:
    for season in SEASONS:
        if os.path.isdir(config.output("models", season)):
            return season
    raise ConfigurationError(
        f"there are no trained models in {config.output('models')}, run train first."
    )


def _accuracy_rows(
    variant: str,
    models: Dict[Tuple[str, SeriesKey], CausalModel],
    dataset: AirQualityDataset,
    diffs: DiffPanel,
    splits: Dict[str, SeasonalSplit],
) -> List[Dict[str, Any]]:
    rows = []
    for (season, target), model in models.items():
        accuracy, n_test = held_out_accuracy(
            model,
            diffs,
            dataset.get(target),
            splits[season].test_hours,
            dataset.meteorology if model.environment_dimension else None,
        )
        rows.append(
            {
                "season": season,
                "target": target.label(),
                "variant": variant,
                "K": model.n_clusters,
                "N": model.n_neighbors,
                "accuracy": accuracy,
                "n_test": n_test,
            }
        )
    return rows


def cmd_evaluate(
    config: PipelineConfig, ablations: bool = False, verbose: bool = False
) -> str:
    """
    Score the trained models on the held out days of each season. With ``ablations`` the
    variants without patterns and without confounders are trained and scored too.

    Raises:
        InsufficientDataError: If a season has no test hours to evaluate.
    """
    dataset, diffs, splits = _prepare(config)
    full = {}
    for season in splits:
        for target, model in load_models(config, season).items():
            full[(season, target)] = model
    rows = _accuracy_rows("full", full, dataset, diffs, splits)

    if ablations:
        for variant, flags in (
            ("no_patterns", {"no_patterns": True}),
            ("no_confounders", {"no_confounders": True}),
        ):
            outcomes = train_models(
                config.variant(**flags), dataset, diffs, splits, verbose=verbose
            )
            models = {(o.season, o.target): o.model for o in outcomes}
            rows.extend(_accuracy_rows(variant, models, dataset, diffs, splits))

    frame = pd.DataFrame(
        rows, columns=["season", "target", "variant", "K", "N", "accuracy", "n_test"]
    )
    frame = frame.sort_values(["season", "target", "variant"], kind="stable")
    _write_csv(frame, config.output("evaluation", "accuracy.csv"))
    means = frame.groupby("variant", sort=True)["accuracy"].mean()
    return "mean accuracy " + ", ".join(f"{v} {a:.4f}" for v, a in means.items())


def cmd_pathway(
    config: PipelineConfig,
    root: str,
    season: Optional[str] = None,
    hops: Optional[int] = None,
) -> str:
    """
    Expand the causal pathway of a root series from the trained models of a season.

    Raises:
        MissingModelError: If a node which has to be expanded has no model.
    """
    try:
        root_key = SeriesKey.from_label(root)
    except ValueError as error:
        raise ConfigurationError(str(error)) from error
    season = season or _default_season(config)
    graph = expand_pathway(
        load_models(config, season), root_key, max_hops=hops or config.pathway_hops
    )
    atomic_write_text(
        config.output("pathway", f"{root_key.label()}.dot"), graph.to_dot()
    )
    serialize(graph.to_document(), config.output("pathway", f"{root_key.label()}.json"))
    return (
        f"pathway of {root_key.label()} in {season}: {len(graph.nodes)} nodes and "
        f"{len(graph.edges)} edges"
    )


def cmd_pca(config: PipelineConfig, target: str, season: Optional[str] = None) -> str:
    """
    Project the environment of a model's training hours on two principal components,
    with the cluster tag of every hour.
    """
    try:
        key = SeriesKey.from_label(target)
    except ValueError as error:
        raise ConfigurationError(str(error)) from error
    season = season or _default_season(config)
    file_name = config.output("models", season, _artifact_name(key))
    model = load_model(file_name)
    dataset = load_ingested(config)
    if dataset.meteorology is None:
        raise ConfigurationError(
            "the cluster projection needs the ingested meteorology."
        )
    if model.timestamps is None or model.tags is None:
        raise ConfigurationError(f"{file_name} does not record its training hours.")

    environment = dataset.meteorology.at(model.timestamps)
    known = ~np.isnan(environment).any(axis=1)
    projection = pca_project(environment[known], dims=2)
    _write_csv(
        pd.DataFrame(
            {
                "timestamp": epoch_hours_to_iso(model.timestamps[known]),
                "pc1": projection.rows[:, 0],
                "pc2": projection.rows[:, 1],
                "tag": model.tags[known],
            }
        ),
        config.output("pca", "clusters.csv"),
    )
    serialize(
        {
            "target": key.label(),
            "season": season,
            "explained_variance": projection.explained_variance.tolist(),
        },
        config.output("pca", "explained_variance.json"),
    )
    return f"projected {int(known.sum())} training hours of {key.label()}"


def cmd_synth_bench(config: PipelineConfig, verbose: bool = False) -> str:
    """Run the synthetic structure recovery benchmark, writing its report and graphs."""
    spec = config.synthetic
    settings = BenchmarkSettings(
        alpha=config.granger_alpha,
        lasso_penalty=config.lasso_penalty,
        lasso_one_standard_error=config.lasso_one_standard_error,
        pg=PgSettings(
            alphabet=config.alphabet,
            sigma=config.sigma,
            delta_t=config.delta_t,
            min_corr=config.min_corr,
            max_lag=spec.max_lag,
            n_neighbors=max(config.n_neighbors),
            n_clusters=1 if config.no_confounders else spec.regimes,
            min_score=config.min_score,
            seed=config.seed,
        ),
        record_timings=config.record_timings,
    )
    report = run_benchmark(spec, settings, seeds=config.bench_seeds, verbose=verbose)
    serialize(report.to_document(), config.output("bench", "report.json"))
    for trial in report.trials:
        atomic_write_text(
            config.output("bench", f"truth_seed{trial.seed}.dot"), trial.truth.to_dot()
        )
        for method, graph in trial.graphs.items():
            atomic_write_text(
                config.output("bench", f"{method}_seed{trial.seed}.dot"), graph.to_dot()
            )
    return "mean f1 " + ", ".join(
        f"{method} {score.f1:.4f}" for method, score in report.per_method.items()
    )
