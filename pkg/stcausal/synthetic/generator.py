"""
Linear lagged causal systems with a planted confounder, used to benchmark structure
recovery.
"""
import logging
import os
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
import pandas as pd
from pydantic import (
    Field,
    NonNegativeInt,
    PositiveInt,
    confloat,
    root_validator,
    validator,
)

from stcausal.common_structures import POLLUTANTS, ResultsConfig
from stcausal.datasets.series import epoch_hours_to_iso
from stcausal.exceptions import UnstableSystemError
from stcausal.validators import check_probability

logger = logging.getLogger(__name__)

MAX_SPECTRAL_RADIUS = 0.95
MAX_RESCALES = 10
#: The first hour of exported synthetic datasets, 2015-03-01T00:00.
EXPORT_START_HOUR = 395880


class SyntheticSpec(ResultsConfig):
    """
    The shape of a synthetic causal system.
    """

    n_series: PositiveInt = Field(20, description="The number of series.")
    max_lag: PositiveInt = Field(3, description="The largest lag of an edge in hours.")
    edge_density: float = Field(
        0.1, description="The probability of an edge between two non-confounder series."
    )
    confounder_index: NonNegativeInt = Field(
        3, description="The series which drives every other series."
    )
    noise_std: confloat(gt=0) = Field(
        1.0, description="The spread of the Gaussian noise."
    )
    n_samples: PositiveInt = Field(
        5000, description="The number of hourly samples kept."
    )
    burn_in: NonNegativeInt = Field(
        200, description="The samples simulated then discarded."
    )
    coefficient_range: Tuple[float, float] = Field(
        (0.3, 0.9), description="The range of the absolute edge coefficients."
    )
    regimes: int = Field(
        1, description="The hidden regimes, each with its own non-confounder edges."
    )
    regime_persistence: confloat(ge=0, lt=1) = Field(
        0.98, description="The probability of staying in the current regime each hour."
    )
    seed: int = Field(0, description="The seed of every random draw.")

    _check_density = validator("edge_density", allow_reuse=True)(check_probability)

    @validator("regimes")
    def _check_regimes(cls, regimes):
        if regimes not in (1, 2):
            raise ValueError("Only one or two regimes are supported.")
        return regimes

    @validator("coefficient_range")
    def _check_range(cls, coefficients):
        low, high = coefficients
        if not 0 < low <= high:
            raise ValueError(
                f"The coefficient range {coefficients} should satisfy 0 < low <= high."
            )
        return coefficients

    @root_validator(skip_on_failure=True)
    def _check_confounder(cls, values):
        if values["confounder_index"] >= values["n_series"]:
            raise ValueError(
                f"The confounder {values['confounder_index']} is not one of the "
                f"{values['n_series']} series."
            )
        return values


class TruthEdge(ResultsConfig):
    source: NonNegativeInt
    target: NonNegativeInt
    lag: PositiveInt
    coefficient: float
    regime: Optional[int] = Field(
        None, description="The regime the edge is active in, None when always active."
    )


class TruthGraph(ResultsConfig):
    n_nodes: PositiveInt
    edges: List[TruthEdge] = Field(default_factory=list)

    @validator("edges")
    def _no_self_edges(cls, edges):
        if any(edge.source == edge.target for edge in edges):
            raise ValueError("A series can not cause itself.")
        return edges

    def edge_set(self) -> Set[Tuple[int, int]]:
        return {(edge.source, edge.target) for edge in self.edges}

    def to_dot(self, name: str = "truth") -> str:
        lines = [f"digraph {name} {{"]
        lines.extend(f'  "x{i}";' for i in range(self.n_nodes))
        for edge in sorted(self.edges, key=lambda e: (e.source, e.target, e.lag)):
            label = f"lag {edge.lag}"
            if edge.regime is not None:
                label += f" r{edge.regime}"
            lines.append(f'  "x{edge.source}" -> "x{edge.target}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


class SyntheticSystem(ResultsConfig):
    """
    A generated system: its true graph, the T x n series, sensor locations and, with two
    regimes, the hidden regime path and the environmental signal revealing it.
    """

    spec: SyntheticSpec
    truth: TruthGraph
    series: np.ndarray = Field(..., description="The T x n series values.")
    locations: List[Tuple[float, float]] = Field(
        ..., description="The (latitude, longitude) of each series."
    )
    regime_path: np.ndarray = Field(..., description="The regime of each sample.")
    environment: np.ndarray = Field(..., description="The T x 2 environmental signal.")


def _draw_edges(
    spec: SyntheticSpec, rng: np.random.Generator, regime: Optional[int]
) -> List[TruthEdge]:
    low, high = spec.coefficient_range
    edges = []
    for source in range(spec.n_series):
        for target in range(spec.n_series):
            if source == target or spec.confounder_index in (source, target):
                continue
            if rng.random() < spec.edge_density:
                edges.append(
                    TruthEdge(
                        source=source,
                        target=target,
                        lag=int(rng.integers(1, spec.max_lag + 1)),
                        coefficient=float(
                            rng.choice([-1.0, 1.0]) * rng.uniform(low, high)
                        ),
                        regime=regime,
                    )
                )
    return edges


def _lag_matrices(n_series: int, max_lag: int, edges: List[TruthEdge]) -> np.ndarray:
    """The L x n x n matrices, ``A[l - 1, target, source]`` weighs lag l."""
    matrices = np.zeros((max_lag, n_series, n_series))
    for edge in edges:
        matrices[edge.lag - 1, edge.target, edge.source] += edge.coefficient
    return matrices


def spectral_radius(matrices: np.ndarray) -> float:
    """The spectral radius of the companion matrix of a lagged linear system."""
    max_lag, n, _ = matrices.shape
    companion = np.zeros((n * max_lag, n * max_lag))
    companion[:n] = np.hstack(list(matrices))
    companion[n:, :-n] = np.eye(n * (max_lag - 1))
    if not companion.size:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def _stabilize(
    spec: SyntheticSpec, regimes: List[List[TruthEdge]]
) -> List[List[TruthEdge]]:
    """Shrink every coefficient by a common factor until each regime is stable."""
    for attempt in range(MAX_RESCALES + 1):
        radius = max(
            spectral_radius(_lag_matrices(spec.n_series, spec.max_lag, edges))
            for edges in regimes
        )
        if radius < MAX_SPECTRAL_RADIUS:
            return regimes
        if attempt == MAX_RESCALES:
            break
        scale = 0.9 * MAX_SPECTRAL_RADIUS / radius
        logger.debug(
            f"spectral radius {radius:.3f}, rescaling the coefficients by {scale:.3f}."
        )
        regimes = [
            [
                edge.copy(update={"coefficient": edge.coefficient * scale})
                for edge in edges
            ]
            for edges in regimes
        ]
    raise UnstableSystemError(
        f"the system still has spectral radius {radius:.3f} "
        f"after {MAX_RESCALES} rescales."
    )


def gen_synthetic(spec: SyntheticSpec) -> SyntheticSystem:
    """
    Generate a stationary linear lagged system
    ``x_j(t) = sum_(i -> j) c_ij x_i(t - lag_ij) + noise``.

    The confounder drives every other series, the remaining edges are drawn with
    probability ``edge_density`` (independently per regime). Coefficients are rescaled
    until every regime's spectral radius is below 0.95.

    Raises:
        UnstableSystemError: If ten rescales do not make the system stable.
    """
    rng = np.random.default_rng(spec.seed)
    low, high = spec.coefficient_range
    shared = [
        TruthEdge(
            source=spec.confounder_index,
            target=target,
            lag=int(rng.integers(1, spec.max_lag + 1)),
            coefficient=float(rng.choice([-1.0, 1.0]) * rng.uniform(low, high)),
        )
        for target in range(spec.n_series)
        if target != spec.confounder_index
    ]
    if spec.regimes == 1:
        per_regime = [_draw_edges(spec, rng, None)]
    else:
        per_regime = [_draw_edges(spec, rng, regime) for regime in range(spec.regimes)]

    stable = _stabilize(spec, [shared + edges for edges in per_regime])
    matrices = [_lag_matrices(spec.n_series, spec.max_lag, edges) for edges in stable]
    # the shared confounder edges lead every regime's list
    truth_edges = stable[0][: len(shared)] + [
        edge for edges in stable for edge in edges[len(shared) :]
    ]

    total = spec.n_samples + spec.burn_in
    regime_path = np.zeros(total, dtype=int)
    if spec.regimes > 1:
        switches = rng.random(total) > spec.regime_persistence
        for t in range(1, total):
            regime_path[t] = (
                1 - regime_path[t - 1] if switches[t] else regime_path[t - 1]
            )

    noise = rng.normal(0.0, spec.noise_std, size=(total, spec.n_series))
    values = np.zeros((total, spec.n_series))
    for t in range(total):
        current = noise[t].copy()
        lagged = matrices[regime_path[t]]
        for lag in range(1, min(spec.max_lag, t) + 1):
            current += lagged[lag - 1] @ values[t - lag]
        values[t] = current

    environment = rng.normal(0.0, 1.0, size=(total, 2)) + 3.0 * regime_path[:, None]
    latitudes = rng.uniform(30.0, 32.0, spec.n_series)
    longitudes = rng.uniform(120.0, 122.0, spec.n_series)
    return SyntheticSystem(
        spec=spec,
        truth=TruthGraph(n_nodes=spec.n_series, edges=truth_edges),
        series=values[spec.burn_in :],
        locations=list(zip(latitudes.tolist(), longitudes.tolist())),
        regime_path=regime_path[spec.burn_in :],
        environment=environment[spec.burn_in :],
    )


def sensor_name(index: int) -> str:
    return f"x{index}"


def export_dataset(system: SyntheticSystem, directory: str) -> Dict[str, str]:
    """
    Write a synthetic system as the air-quality, sensor and meteorology tables the
    ingest stage reads. Each series is integrated into the PM25 readings of its own
    sensor so that its 1-hour differences are the generated values; the environmental
    signal becomes the temperature and humidity of a single station.

    Returns:
        The paths of the ``air``, ``sensors`` and ``meteo`` tables.
    """
    os.makedirs(directory, exist_ok=True)
    n_samples, n_series = system.series.shape
    stamps = epoch_hours_to_iso(EXPORT_START_HOUR + np.arange(n_samples))

    levels = np.cumsum(system.series, axis=0)
    levels = levels - levels.min(axis=0) + 20.0
    frames = []
    for index in range(n_series):
        frame = pd.DataFrame({"sensor_id": sensor_name(index), "timestamp": stamps})
        for pollutant in POLLUTANTS:
            frame[pollutant] = levels[:, index] if pollutant == POLLUTANTS[0] else ""
        frames.append(frame)
    paths = {
        "air": os.path.join(directory, "air_quality.csv"),
        "sensors": os.path.join(directory, "sensors.csv"),
        "meteo": os.path.join(directory, "meteorology.csv"),
    }
    pd.concat(frames, ignore_index=True).to_csv(
        paths["air"], index=False, float_format="%.6f"
    )

    pd.DataFrame(
        {
            "sensor_id": [sensor_name(i) for i in range(n_series)],
            "city_id": "synthetic",
            "lat": [lat for lat, _ in system.locations],
            "lon": [lon for _, lon in system.locations],
        }
    ).to_csv(paths["sensors"], index=False)

    centre = np.mean(np.asarray(system.locations), axis=0)
    pd.DataFrame(
        {
            "station_id": "m0",
            "lat": centre[0],
            "lon": centre[1],
            "timestamp": stamps,
            "T": system.environment[:, 0],
            "P": 1013.0,
            "H": system.environment[:, 1],
            "WS": 2.0,
            "WD": 180.0,
        }
    ).to_csv(paths["meteo"], index=False, float_format="%.6f")
    return paths
