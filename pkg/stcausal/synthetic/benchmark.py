"""
Structure recovery with the pattern guided pipeline on synthetic systems and the
benchmark comparing it with the Granger baselines.
"""
import logging
import time
from typing import Dict, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
import tqdm
from pydantic import Field, PositiveInt, confloat
from typing_extensions import Literal

from stcausal.causal.em import EMSettings
from stcausal.causal.refine import refine
from stcausal.common_structures import ResultsConfig, SeriesKey, SettingsConfig
from stcausal.datasets.series import (
    DiffPanel,
    DiffSeries,
    MeteoSeries,
    PollutantSeries,
    SensorMeta,
)
from stcausal.datasets.transforms import sax_discretize
from stcausal.exceptions import NoPatternsError
from stcausal.matching.matching import (
    CandidateSet,
    candidate_causers,
    matched_training_windows,
)
from stcausal.patterns.mining import mine_feps
from stcausal.synthetic.baselines import (
    RecoveredGraph,
    lasso_granger_graph,
    pairwise_granger_graph,
)
from stcausal.synthetic.generator import (
    SyntheticSpec,
    SyntheticSystem,
    TruthGraph,
    gen_synthetic,
    sensor_name,
)

logger = logging.getLogger(__name__)

Method = Literal["pg", "lasso-granger", "granger"]


class PgSettings(SettingsConfig):
    """
    The pipeline parameters used to recover synthetic structures.
    """

    alphabet: PositiveInt = Field(5, description="The number of symbolic levels.")
    sigma: confloat(gt=0, le=1) = Field(
        0.1, description="The relative minimum support."
    )
    delta_t: PositiveInt = Field(
        60, description="The pattern time constraint in minutes."
    )
    min_corr: confloat(ge=0, le=1) = Field(
        0.5, description="The candidate correlation gate."
    )
    max_lag: PositiveInt = Field(3, description="The lag depth L.")
    n_neighbors: int = Field(3, ge=0, description="The neighbours kept per cluster.")
    n_clusters: PositiveInt = Field(1, description="The number of confounder clusters.")
    min_score: Optional[float] = Field(
        1.0, description="Only neighbours scoring above this are kept."
    )
    seed: int = Field(0, description="The seed of the cluster initialization.")


class EdgeMetrics(NamedTuple):
    precision: float
    recall: float
    f1: float


def edge_metrics(
    recovered: Set[Tuple[int, int]], truth: Set[Tuple[int, int]]
) -> EdgeMetrics:
    """
    Compare recovered edges with the true ones ignoring lags, an undefined ratio counts
    as 0 and two empty graphs agree perfectly.
    """
    recovered, truth = set(recovered), set(truth)
    if not recovered and not truth:
        return EdgeMetrics(1.0, 1.0, 1.0)
    hits = len(recovered & truth)
    precision = hits / len(recovered) if recovered else 0.0
    recall = hits / len(truth) if truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EdgeMetrics(precision, recall, f1)


def simplified_pg_graph(
    series: np.ndarray,
    locations: Sequence[Tuple[float, float]],
    settings: Optional[PgSettings] = None,
    environment: Optional[np.ndarray] = None,
) -> RecoveredGraph:
    """
    Recover a structure with the full pipeline on synthetic series: symbolic patterns,
    candidate matching without a distance limit, then causal learning per target.

    The synthetic values already play the role of 1-hour differences so they are only
    z-normalized. ``i -> j`` is an edge when series ``i`` is a neighbour of ``j`` in any
    cluster.
    """
    settings = settings or PgSettings()
    series = np.asarray(series, dtype=float)
    n_samples, n_nodes = series.shape
    hours = np.arange(n_samples, dtype=np.int64)

    sensors, patterns, normalized = {}, {}, []
    for index in range(n_nodes):
        name = sensor_name(index)
        lat, lon = locations[index]
        sensors[name] = SensorMeta(
            sensor_id=name, city_id="synthetic", latitude=lat, longitude=lon
        )
        values = series[:, index]
        readings = PollutantSeries(
            sensor_id=name, category=1, timestamps=hours, values=values
        )
        database = sax_discretize(readings, alphabet=settings.alphabet)
        patterns[readings.key] = mine_feps(
            database, sigma=settings.sigma, delta_t=settings.delta_t
        )
        std = float(values.std()) or 1.0
        normalized.append(
            DiffSeries(
                sensor_id=name,
                category=1,
                timestamps=hours,
                values=(values - values.mean()) / std,
                mean=float(values.mean()),
                std=std,
            )
        )
    diffs = DiffPanel(normalized)
    meteo = None
    if settings.n_clusters > 1 and environment is not None:
        meteo = MeteoSeries(
            timestamps=hours,
            vectors=environment,
            columns=[f"e{i}" for i in range(environment.shape[1])],
        )
    min_rows = 10 * settings.max_lag * (1 + settings.n_neighbors) * settings.n_clusters

    edges = []
    for index in range(n_nodes):
        target = SeriesKey(1, sensor_name(index))
        try:
            candidates = candidate_causers(
                target,
                patterns,
                sensors,
                max_distance_km=float("inf"),
                min_corr=settings.min_corr,
                lag_hours=settings.max_lag,
            )
            windows = matched_training_windows(
                patterns[target],
                [patterns[c.key] for c in candidates],
                settings.max_lag,
            )
        except NoPatternsError:
            candidates = CandidateSet(category=1, sensor_id=target.sensor_id)
            windows = hours
        if windows.size < min_rows:
            logger.debug(
                f"{target.label()} has {windows.size} matched windows, "
                "training on every hour."
            )
            windows = hours
        model = refine(
            target,
            candidates,
            diffs,
            windows,
            meteo=meteo,
            n_clusters=settings.n_clusters if meteo is not None else 1,
            n_neighbors=settings.n_neighbors,
            seed=settings.seed,
            max_lag=settings.max_lag,
            patterns=patterns,
            local_categories=[1],
            min_score=settings.min_score,
            settings=EMSettings(),
        )
        for parents in model.parents:
            for neighbor in parents.neighbors:
                edges.append((int(neighbor.sensor_id[1:]), index))
    return RecoveredGraph(method="pg", n_nodes=n_nodes, edges=edges)


class BenchmarkSettings(SettingsConfig):
    alpha: confloat(gt=0, lt=1) = Field(0.05, description="The Granger test level.")
    lasso_penalty: Optional[float] = Field(
        None, description="The Lasso penalty, None picks it by cross validation."
    )
    lasso_one_standard_error: bool = Field(
        True,
        description="Use the largest cross validated penalty within one standard "
        "error of the best.",
    )
    pg: PgSettings = Field(default_factory=PgSettings)
    methods: List[Method] = Field(["pg", "lasso-granger", "granger"])
    record_timings: bool = Field(
        False,
        description="Record the runtime of every method, reports then differ per run.",
    )


class MethodScore(ResultsConfig):
    precision: float
    recall: float
    f1: float
    runtime_ms: Optional[float] = None

    def to_document(self) -> Dict:
        document = {"precision": self.precision, "recall": self.recall, "f1": self.f1}
        if self.runtime_ms is not None:
            document["runtime_ms"] = self.runtime_ms
        return document


class TrialResult(ResultsConfig):
    seed: int
    truth: TruthGraph
    graphs: Dict[str, RecoveredGraph]
    scores: Dict[str, MethodScore]


class BenchmarkReport(ResultsConfig):
    """
    The recovery scores of every method, averaged over the seeds, and each trial.
    """

    spec: SyntheticSpec
    seeds: List[int]
    per_method: Dict[str, MethodScore]
    trials: List[TrialResult]

    def to_document(self) -> Dict:
        return {
            "spec": self.spec.dict(),
            "seeds": self.seeds,
            "per_method": {m: s.to_document() for m, s in self.per_method.items()},
            "trials": [
                {
                    "seed": trial.seed,
                    "n_true_edges": len(trial.truth.edge_set()),
                    "per_method": {m: s.to_document() for m, s in trial.scores.items()},
                }
                for trial in self.trials
            ],
        }


def recover(
    method: str, system: SyntheticSystem, settings: BenchmarkSettings
) -> RecoveredGraph:
    if method == "granger":
        return pairwise_granger_graph(
            system.series, system.spec.max_lag, alpha=settings.alpha
        )
    if method == "lasso-granger":
        return lasso_granger_graph(
            system.series,
            system.spec.max_lag,
            penalty=settings.lasso_penalty,
            seed=system.spec.seed,
            one_standard_error=settings.lasso_one_standard_error,
        )
    return simplified_pg_graph(
        system.series, system.locations, settings.pg, environment=system.environment
    )


def run_trial(spec: SyntheticSpec, settings: BenchmarkSettings) -> TrialResult:
    """Generate one system and score every method on it."""
    system = gen_synthetic(spec)
    truth = system.truth.edge_set()
    graphs, scores = {}, {}
    for method in settings.methods:
        start = time.perf_counter()
        graphs[method] = recover(method, system, settings)
        elapsed = (time.perf_counter() - start) * 1000
        metrics = edge_metrics(graphs[method].edge_set(), truth)
        scores[method] = MethodScore(
            precision=metrics.precision,
            recall=metrics.recall,
            f1=metrics.f1,
            runtime_ms=elapsed if settings.record_timings else None,
        )
        logger.info(f"seed {spec.seed} {method}: f1 {metrics.f1:.3f}")
    return TrialResult(seed=spec.seed, truth=system.truth, graphs=graphs, scores=scores)


def summarize(
    spec: SyntheticSpec, trials: List[TrialResult], settings: BenchmarkSettings
) -> BenchmarkReport:
    per_method = {}
    for method in settings.methods:
        scores = [trial.scores[method] for trial in trials]
        runtimes = [s.runtime_ms for s in scores if s.runtime_ms is not None]
        per_method[method] = MethodScore(
            precision=float(np.mean([s.precision for s in scores])),
            recall=float(np.mean([s.recall for s in scores])),
            f1=float(np.mean([s.f1 for s in scores])),
            runtime_ms=float(np.mean(runtimes)) if runtimes else None,
        )
    return BenchmarkReport(
        spec=spec,
        seeds=[trial.seed for trial in trials],
        per_method=per_method,
        trials=trials,
    )


def run_benchmark(
    spec: SyntheticSpec,
    settings: Optional[BenchmarkSettings] = None,
    seeds: Optional[Sequence[int]] = None,
    verbose: bool = False,
) -> BenchmarkReport:
    """
    Score every method on one generated system per seed.

    Parameters:
        spec: The system shape, its seed is replaced by each of ``seeds``.
        settings: The method settings.
        seeds: The seeds to run, the seed of the synthetic system by default.
        verbose: Show a progress bar.
    """
    settings = settings or BenchmarkSettings()
    seeds = list(seeds) if seeds is not None else [spec.seed]
    trials = [
        run_trial(spec.copy(update={"seed": seed}), settings)
        for seed in tqdm.tqdm(
            seeds,
            ncols=80,
            desc="{:30s}".format("synthetic benchmark"),
            disable=not verbose,
        )
    ]
    return summarize(spec, trials, settings)
