"""
Pattern-match statistics between sensors, candidate causer selection and the
pattern-matched periods used as training windows.
"""
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, NonNegativeFloat, PositiveInt
from typing_extensions import Literal

from stcausal.common_structures import (
    ResultsConfig,
    SeriesKey,
    category_index,
    pollutant_name,
)
from stcausal.datasets.series import SensorMeta
from stcausal.datasets.transforms import haversine_km
from stcausal.exceptions import EmptyTimestampListError, NoPatternsError
from stcausal.patterns.mining import PatternSet

logger = logging.getLogger(__name__)

CorrRule = Literal["harmonic", "printed"]


def match_timestamps(
    target: Sequence[int], causer: Sequence[int], lag: int
) -> Tuple[np.ndarray, np.ndarray, List[Tuple[int, int]]]:
    """
    Match the pattern starts of a causer to those of a target.

    A causer start ``t'`` matches a target start ``t`` when ``0 <= t - t' <= lag``; both
    lists must be sorted and use the same time unit as ``lag``. A single merge scan keeps a
    window of causer starts for each target start.

    Returns:
        The matched target starts, the matched causer starts and every matched
        ``(target, causer)`` pair.
    """
    target = np.asarray(target, dtype=np.int64)
    causer = np.asarray(causer, dtype=np.int64)
    matched_target = np.zeros(target.size, dtype=bool)
    matched_causer = np.zeros(causer.size, dtype=bool)
    pairs: List[Tuple[int, int]] = []

    low = 0
    for i, t in enumerate(target.tolist()):
        # drop causer starts which are too early for this and every later target start
        while low < causer.size and causer[low] < t - lag:
            low += 1
        j = low
        while j < causer.size and causer[j] <= t:
            matched_target[i] = True
            matched_causer[j] = True
            pairs.append((t, int(causer[j])))
            j += 1
    return target[matched_target], causer[matched_causer], pairs


class MatchStats(ResultsConfig):
    """
    How well the pattern starts of a causer anticipate those of a target.
    """

    precision: float = Field(
        ..., description="The fraction of causer starts matching some target start."
    )
    recall: float = Field(
        ..., description="The fraction of target starts matched by some causer start."
    )
    corr: float = Field(..., description="The pattern based correlation.")
    matched_pairs: List[Tuple[int, int]] = Field(
        ..., description="The matched (target, causer) start pairs."
    )
    lag: int = Field(..., description="The matching horizon in the timestamps' unit.")

    @property
    def n_matched(self) -> int:
        """The number of distinct matched target starts."""
        return len({t for t, _ in self.matched_pairs})


def pattern_corr(precision: float, recall: float, rule: CorrRule = "harmonic") -> float:
    """
    Combine precision and recall, ``harmonic`` is 2PR/(P+R) and ``printed`` is 2P/(P+R);
    both are 0 when P + R = 0.
    """
    if precision + recall <= 0:
        return 0.0
    if rule == "printed":
        return 2 * precision / (precision + recall)
    return 2 * precision * recall / (precision + recall)


def match_stats(
    target: Sequence[int],
    causer: Sequence[int],
    lag: int,
    corr_rule: CorrRule = "harmonic",
) -> MatchStats:
    """
    The precision, recall and correlation of a causer's pattern starts against a target's.

    Raises:
        EmptyTimestampListError: If either list is empty.
    """
    if len(target) == 0 or len(causer) == 0:
        raise EmptyTimestampListError(
            "match statistics need pattern starts for both the target and the causer."
        )
    matched_target, matched_causer, pairs = match_timestamps(target, causer, lag)
    precision = matched_causer.size / len(causer)
    recall = matched_target.size / len(target)
    return MatchStats(
        precision=precision,
        recall=recall,
        corr=pattern_corr(precision, recall, corr_rule),
        matched_pairs=pairs,
        lag=lag,
    )


class Candidate(ResultsConfig):
    sensor_id: str = Field(..., description="The candidate causer sensor.")
    category: PositiveInt = Field(
        ..., description="The category of the sensor which best anticipates the target."
    )
    corr: float = Field(..., description="The pattern based correlation.")
    distance_km: NonNegativeFloat = Field(
        ..., description="The distance from the target sensor."
    )

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)


class CandidateSet(ResultsConfig):
    """
    The ranked pattern-correlated neighbours of a target series.
    """

    category: PositiveInt = Field(..., description="The target category.")
    sensor_id: str = Field(..., description="The target sensor.")
    candidates: List[Candidate] = Field(
        default_factory=list,
        description="The candidates by correlation descending then distance ascending.",
    )

    @property
    def target(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def to_document(self) -> Dict:
        return {
            "target": {
                "category": self.category,
                "pollutant": pollutant_name(self.category),
                "sensor_id": self.sensor_id,
            },
            "candidates": [
                {
                    "sensor": c.sensor_id,
                    "category": c.category,
                    "pollutant": pollutant_name(c.category),
                    "corr": c.corr,
                    "distance_km": c.distance_km,
                }
                for c in self.candidates
            ],
        }

    @classmethod
    def from_document(cls, document: Dict) -> "CandidateSet":
        target = document["target"]
        return cls(
            category=target.get("category") or category_index(target["pollutant"]),
            sensor_id=target["sensor_id"],
            candidates=[
                Candidate(
                    sensor_id=c["sensor"],
                    category=c["category"],
                    corr=c["corr"],
                    distance_km=c["distance_km"],
                )
                for c in document["candidates"]
            ],
        )


def _ranking(candidate: Candidate) -> Tuple[float, float, str]:
    return -candidate.corr, candidate.distance_km, candidate.sensor_id


def candidate_causers(
    target: SeriesKey,
    patterns: Mapping[SeriesKey, PatternSet],
    sensors: Mapping[str, SensorMeta],
    max_distance_km: float = 200.0,
    min_corr: float = 0.5,
    lag_hours: int = 3,
    top_x: Optional[int] = None,
    corr_rule: CorrRule = "harmonic",
    categories: Optional[Sequence[int]] = None,
) -> CandidateSet:
    """
    Find the sensors whose pattern starts anticipate the target's.

    Every other sensor within ``max_distance_km`` is scored against each of its categories;
    the best category per sensor (ties to the lower index) is kept when its correlation
    reaches ``min_corr``.

    Parameters:
        target: The (category, sensor) to find causers for.
        patterns: The mined pattern sets keyed by (category, sensor).
        sensors: The sensor locations.
        max_distance_km: The distance gate, ``inf`` considers every pair.
        min_corr: The correlation gate.
        lag_hours: The matching horizon in hours.
        top_x: Keep at most this many candidates.
        corr_rule: How precision and recall are combined.
        categories: Only consider causers of these categories, all of them by default.

    Raises:
        NoPatternsError: If the target has no pattern occurrences.
    """
    if target not in patterns or patterns[target].occurrence_timestamps().size == 0:
        raise NoPatternsError(f"{target.label()} has no frequent evolving patterns.")
    target_starts = patterns[target].occurrence_timestamps()
    origin = sensors[target.sensor_id].location
    lag_minutes = lag_hours * 60

    by_sensor: Dict[str, List[SeriesKey]] = {}
    for key in patterns:
        if key.sensor_id == target.sensor_id:
            continue
        if categories is None or key.category in categories:
            by_sensor.setdefault(key.sensor_id, []).append(key)

    candidates = []
    for sensor_id in sorted(by_sensor):
        distance = haversine_km(origin, sensors[sensor_id].location)
        if distance > max_distance_km:
            continue
        best: Optional[Tuple[float, int]] = None
        for key in sorted(by_sensor[sensor_id]):
            starts = patterns[key].occurrence_timestamps()
            if starts.size == 0:
                continue
            corr = match_stats(target_starts, starts, lag_minutes, corr_rule).corr
            if best is None or corr > best[0]:
                best = (corr, key.category)
        if best is not None and best[0] >= min_corr:
            candidates.append(
                Candidate(
                    sensor_id=sensor_id,
                    category=best[1],
                    corr=best[0],
                    distance_km=distance,
                )
            )

    candidates.sort(key=_ranking)
    if top_x is not None:
        candidates = candidates[:top_x]
    logger.info(
        f"{target.label()} has {len(candidates)} candidate causers: "
        f"{[c.sensor_id for c in candidates]}"
    )
    return CandidateSet(
        category=target.category, sensor_id=target.sensor_id, candidates=candidates
    )


def matched_training_windows(
    target: PatternSet, candidates: Sequence[PatternSet], lag_hours: int = 3
) -> np.ndarray:
    """
    The target pattern starts anticipated by at least one candidate's pattern starts,
    as sorted distinct epoch hours. With no candidates every target start is a window.
    """
    starts = target.occurrence_timestamps()
    if not candidates:
        return np.unique(starts // 60)
    matched = np.zeros(0, dtype=np.int64)
    for candidate in candidates:
        causer = candidate.occurrence_timestamps()
        if causer.size == 0:
            continue
        hits, _, _ = match_timestamps(starts, causer, lag_hours * 60)
        matched = np.union1d(matched, hits)
    return np.unique(matched // 60)
