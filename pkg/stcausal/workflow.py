"""
The pipeline stages which fan independent (category, sensor) work items out to a pool of
workers: pattern mining, candidate selection and model training.
"""
import abc
import logging
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import tqdm
from pydantic import BaseModel, Field
from typing_extensions import Literal

from stcausal.causal.em import CausalModel, EMSettings
from stcausal.causal.refine import held_out_accuracy, refine
from stcausal.common_structures import SeriesKey, StageProperties
from stcausal.datasets.series import (
    DiffPanel,
    MeteoSeries,
    PollutantSeries,
    SensorMeta,
)
from stcausal.datasets.transforms import haversine_km, sax_discretize
from stcausal.exceptions import (
    EmptyDatabaseError,
    InsufficientDataError,
    NoPatternsError,
    StCausalException,
)
from stcausal.matching.matching import (
    Candidate,
    CandidateSet,
    CorrRule,
    candidate_causers,
    matched_training_windows,
)
from stcausal.patterns.mining import PatternSet, mine_feps

logger = logging.getLogger(__name__)

THREADS_VARIABLE = "STCAUSAL_THREADS"

#: The share of the training windows held back to select K and N.
VALIDATION_FRACTION = 0.2


def default_processors() -> int:
    """The worker pool size from ``STCAUSAL_THREADS``, one worker when unset."""
    value = os.environ.get(THREADS_VARIABLE, "1")
    try:
        processors = int(value)
    except ValueError:
        raise ValueError(
            f"{THREADS_VARIABLE} should be a positive integer, not {value}."
        )
    return max(processors, 1)


class PipelineStage(BaseModel, abc.ABC):
    """
    The abstract base of every pipeline stage. A stage maps each work item to one result
    and the results are returned in the order of the items whatever the number of workers.
    """

    class Config:
        allow_mutation = True
        validate_assignment = True
        arbitrary_types_allowed = True

    type: Literal["PipelineStage"] = Field(
        "PipelineStage",
        description="The name of the stage which should match the class name.",
    )

    @classmethod
    @abc.abstractmethod
    def description(cls) -> str:
        """Returns a friendly description of the stage."""
        ...

    @classmethod
    @abc.abstractmethod
    def properties(cls) -> StageProperties:
        """Returns the runtime properties of the stage such as parallel safe."""
        ...

    @classmethod
    def info(cls) -> Dict[str, str]:
        return dict(name=cls.__name__, description=cls.description())

    @abc.abstractmethod
    def _apply(self, item: Any) -> Any:
        """Process a single work item."""
        ...

    def apply(
        self,
        items: Sequence[Any],
        processors: Optional[int] = None,
        verbose: bool = True,
    ) -> List[Any]:
        """
        Process every work item.

        Args:
            items:
                The work items.
            processors:
                The number of worker processes, None reads ``STCAUSAL_THREADS``.
            verbose:
                If true a progress bar should be shown on screen.

        Returns:
            The result of each item in the order of ``items``.
        """
        processors = processors or default_processors()
        results = []

        if processors > 1 and len(items) > 1 and self.properties().process_parallel:

            from multiprocessing.pool import Pool

            with Pool(processes=processors) as pool:

                work_list = [pool.apply_async(self._apply, (item,)) for item in items]
                for work in tqdm.tqdm(
                    work_list,
                    total=len(work_list),
                    ncols=80,
                    desc="{:30s}".format(self.type),
                    disable=not verbose,
                ):
                    results.append(work.get())

        else:
            for item in tqdm.tqdm(
                items,
                total=len(items),
                ncols=80,
                desc="{:30s}".format(self.type),
                disable=not verbose,
            ):
                results.append(self._apply(item))

        return results


class PatternMining(PipelineStage):
    type: Literal["PatternMining"] = "PatternMining"
    alphabet: int = Field(5, description="The number of symbolic levels.")
    segment_minutes: int = Field(60, description="The symbolic segment length.")
    sigma: float = Field(0.1, description="The relative minimum support.")
    delta_t: int = Field(60, description="The pattern time constraint in minutes.")

    @classmethod
    def description(cls) -> str:
        return "Discretize each series and mine its frequent evolving patterns."

    @classmethod
    def properties(cls) -> StageProperties:
        return StageProperties(process_parallel=True)

    def _apply(self, item: PollutantSeries) -> Optional[PatternSet]:
        """Mine one series, None when it has no readings to discretize."""
        database = sax_discretize(
            item, alphabet=self.alphabet, segment_minutes=self.segment_minutes
        )
        try:
            return mine_feps(database, sigma=self.sigma, delta_t=self.delta_t)
        except EmptyDatabaseError:
            logger.info(f"{item.key.label()} has no readings, nothing to mine.")
            return None


class CandidateSelection(PipelineStage):
    type: Literal["CandidateSelection"] = "CandidateSelection"
    patterns: Dict[SeriesKey, PatternSet] = Field(
        ..., description="Every mined pattern set."
    )
    sensors: Dict[str, SensorMeta] = Field(..., description="The sensor locations.")
    max_distance_km: float = Field(200.0, description="The distance gate.")
    min_corr: float = Field(0.5, description="The correlation gate.")
    max_lag: int = Field(3, description="The matching horizon in hours.")
    top_x: Optional[int] = Field(None, description="The most candidates kept.")
    corr_rule: CorrRule = "harmonic"
    categories: Optional[List[int]] = Field(
        None, description="The categories a causer may belong to."
    )

    @classmethod
    def description(cls) -> str:
        return "Rank the sensors whose patterns anticipate each target's patterns."

    @classmethod
    def properties(cls) -> StageProperties:
        return StageProperties(process_parallel=True)

    def _apply(self, item: SeriesKey) -> CandidateSet:
        try:
            return candidate_causers(
                item,
                self.patterns,
                self.sensors,
                max_distance_km=self.max_distance_km,
                min_corr=self.min_corr,
                lag_hours=self.max_lag,
                top_x=self.top_x,
                corr_rule=self.corr_rule,
                categories=self.categories,
            )
        except NoPatternsError as error:
            logger.warning(f"{error.raw_message} It has no candidate causers.")
            return CandidateSet(category=item.category, sensor_id=item.sensor_id)


def in_range_candidates(
    target: SeriesKey,
    sensors: Mapping[str, SensorMeta],
    max_distance_km: float,
) -> CandidateSet:
    """Every other sensor within the distance gate, used when patterns are not mined."""
    origin = sensors[target.sensor_id].location
    candidates = []
    for sensor_id in sorted(sensors):
        if sensor_id == target.sensor_id:
            continue
        distance = haversine_km(origin, sensors[sensor_id].location)
        if distance <= max_distance_km:
            candidates.append(
                Candidate(
                    sensor_id=sensor_id,
                    category=target.category,
                    corr=0.0,
                    distance_km=distance,
                )
            )
    candidates.sort(key=lambda c: (c.distance_km, c.sensor_id))
    return CandidateSet(
        category=target.category, sensor_id=target.sensor_id, candidates=candidates
    )


class SweepEntry(BaseModel):
    season: str
    target: str
    n_clusters: int
    n_neighbors: int
    accuracy: Optional[float] = None
    n_validation: int = 0
    status: str = "ok"


class TrainingJob(BaseModel):
    """One target to train on the training hours of one season."""

    class Config:
        arbitrary_types_allowed = True

    season: str
    target: SeriesKey
    train_hours: np.ndarray
    candidates: CandidateSet


class TrainingOutcome(BaseModel):
    class Config:
        arbitrary_types_allowed = True

    season: str
    target: SeriesKey
    model: Optional[CausalModel] = None
    sweep: List[SweepEntry] = Field(default_factory=list)
    error: Optional[StCausalException] = None


class ModelTraining(PipelineStage):
    """
    Train a causal model per target, sweeping K and N on the last part of the training
    windows before refitting the best pair on all of them.
    """

    type: Literal["ModelTraining"] = "ModelTraining"
    diffs: DiffPanel = Field(..., description="The differenced series.")
    series: Dict[SeriesKey, PollutantSeries] = Field(
        ..., description="The raw series used to measure accuracy."
    )
    meteo: Optional[MeteoSeries] = None
    patterns: Optional[Dict[SeriesKey, PatternSet]] = Field(
        None, description="The mined patterns, None trains without pattern matching."
    )
    cluster_grid: List[int] = Field([1], description="The K values swept.")
    neighbor_grid: List[int] = Field([0], description="The N values swept.")
    max_lag: int = 3
    local_categories: Optional[List[int]] = None
    min_score: Optional[float] = 1.0
    seed: int = 0
    em_settings: EMSettings = Field(default_factory=EMSettings)
    max_outer_iterations: int = 10

    @classmethod
    def description(cls) -> str:
        return "Learn the causal model of each target series."

    @classmethod
    def properties(cls) -> StageProperties:
        return StageProperties(process_parallel=True)

    def windows(self, job: TrainingJob) -> np.ndarray:
        """
        The training hours of a job: the pattern-matched hours when patterns are used,
        every training hour otherwise or when too few hours match.
        """
        hours = np.asarray(job.train_hours, dtype=np.int64)
        if self.patterns is None or job.target not in self.patterns:
            return hours
        causers = [
            self.patterns[c.key] for c in job.candidates if c.key in self.patterns
        ]
        matched = matched_training_windows(
            self.patterns[job.target], causers, self.max_lag
        )
        matched = np.intersect1d(matched, hours)
        needed = (
            10
            * self.max_lag
            * (len(self.local_categories or [1]) + max(self.neighbor_grid))
            * max(self.cluster_grid)
        )
        if matched.size < needed:
            logger.warning(
                f"{job.target.label()} {job.season}: only {matched.size} "
                f"pattern-matched hours, training on all {hours.size} hours."
            )
            return hours
        return matched

    def _fit(
        self, job: TrainingJob, windows: np.ndarray, n_clusters: int, n_neighbors: int
    ) -> CausalModel:
        return refine(
            job.target,
            job.candidates,
            self.diffs,
            windows,
            meteo=self.meteo,
            n_clusters=n_clusters,
            n_neighbors=n_neighbors,
            seed=self.seed,
            max_lag=self.max_lag,
            patterns=self.patterns,
            local_categories=self.local_categories,
            min_score=self.min_score,
            settings=self.em_settings,
            max_outer_iterations=self.max_outer_iterations,
        )

    def _score(
        self, model: CausalModel, target: SeriesKey, hours: np.ndarray
    ) -> Tuple[float, int]:
        return held_out_accuracy(
            model, self.diffs, self.series[target], hours, self.meteo
        )

    def _apply(self, item: TrainingJob) -> TrainingOutcome:
        label = item.target.label()
        windows = self.windows(item)
        split = int(np.floor(windows.size * (1 - VALIDATION_FRACTION)))
        fit_hours, validation_hours = windows[:split], windows[split:]

        sweep, best, failure = [], None, None
        for n_clusters in self.cluster_grid:
            for n_neighbors in self.neighbor_grid:
                entry = SweepEntry(
                    season=item.season,
                    target=label,
                    n_clusters=n_clusters,
                    n_neighbors=n_neighbors,
                )
                try:
                    model = self._fit(item, fit_hours, n_clusters, n_neighbors)
                    entry.accuracy, entry.n_validation = self._score(
                        model, item.target, validation_hours
                    )
                except StCausalException as error:
                    entry.status = error.error_type
                    failure = error
                    logger.info(
                        f"{label} {item.season} K={n_clusters} N={n_neighbors}: "
                        f"{error.error_message}"
                    )
                else:
                    if best is None or entry.accuracy > best.accuracy:
                        best = entry
                sweep.append(entry)

        if best is None:
            failure = failure or InsufficientDataError("no parameters could be swept.")
            return TrainingOutcome(
                season=item.season,
                target=item.target,
                sweep=sweep,
                error=type(failure)(f"{label} {item.season}: {failure.raw_message}"),
            )

        try:
            local = self._fit(item, fit_hours, best.n_clusters, 0)
            local_accuracy, _ = self._score(local, item.target, validation_hours)
        except StCausalException as error:
            logger.info(
                f"{label} {item.season}: no local-only model, {error.error_message}"
            )
            local_accuracy = None

        try:
            model = self._fit(item, windows, best.n_clusters, best.n_neighbors)
        except StCausalException as error:
            return TrainingOutcome(
                season=item.season,
                target=item.target,
                sweep=sweep,
                error=type(error)(f"{label} {item.season}: {error.raw_message}"),
            )
        logger.info(
            f"{label} {item.season}: selected K={best.n_clusters} "
            f"N={best.n_neighbors} with validation accuracy {best.accuracy:.4f}"
        )
        model = model.copy(
            update={
                "validation_accuracy": best.accuracy,
                "local_validation_accuracy": local_accuracy,
            }
        )
        return TrainingOutcome(
            season=item.season, target=item.target, model=model, sweep=sweep
        )
