"""
The pattern weighted Granger score of a candidate causer and the initial parent selection.
"""
import logging
from typing import List, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from stcausal.causal.design import (
    Neighbor,
    ParentSpec,
    Slot,
    build_design_rows,
)
from stcausal.causal.regression import chi2_quantile, conditional_variance
from stcausal.common_structures import SeriesKey
from stcausal.datasets.series import DiffPanel
from stcausal.exceptions import NoUsableRowsError
from stcausal.matching.matching import CandidateSet, match_timestamps
from stcausal.patterns.mining import PatternSet

logger = logging.getLogger(__name__)


class GCScore(NamedTuple):
    score: float
    category: Optional[int]
    lag: Optional[int]


def _match_count(
    target: SeriesKey,
    causer: SeriesKey,
    patterns: Mapping[SeriesKey, PatternSet],
    lag_minutes: int,
) -> int:
    if target not in patterns or causer not in patterns:
        return 0
    target_starts = patterns[target].occurrence_timestamps()
    causer_starts = patterns[causer].occurrence_timestamps()
    if target_starts.size == 0 or causer_starts.size == 0:
        return 0
    return int(match_timestamps(target_starts, causer_starts, lag_minutes)[0].size)


def gc_score(
    target: SeriesKey,
    candidate_sensor: str,
    diffs: DiffPanel,
    windows: Sequence[int],
    max_lag: int = 3,
    patterns: Optional[Mapping[SeriesKey, PatternSet]] = None,
    local_categories: Optional[Sequence[int]] = None,
    categories: Optional[Sequence[int]] = None,
    weights: Optional[np.ndarray] = None,
) -> GCScore:
    """
    Score how much a candidate sensor improves the prediction of a target series.

    For each category of the candidate and each lag the residual variance of the target
    given its local lags (``sigma1``) is compared with the variance once the candidate's
    series at that lag is added (``sigma2``):

        score = matches * max(sigma1 - sigma2, 0) / (sigma2 * chi2_L(0.05))

    ``matches`` is the number of target pattern starts anticipated by the candidate's
    pattern starts within ``max_lag`` hours. Without patterns every row counts as a match,
    which turns the score into a plain Granger statistic over its critical value.
    A score above 1 indicates causality.

    Parameters:
        target: The series to explain.
        candidate_sensor: The sensor whose categories are tried as causes.
        diffs: The differenced series.
        windows: The sorted distinct epoch hours the variances are estimated on.
        max_lag: The lag depth L.
        patterns: The mined patterns, None scores without pattern matching.
        local_categories: The local categories conditioned on, all categories at the target sensor by default.
        categories: Restrict the candidate categories tried.
        weights: Row weights aligned with ``windows``.

    Returns:
        The best score with the category and lag achieving it, both None when no category
        had usable rows.
    """
    windows = np.asarray(windows, dtype=np.int64)
    windows, first = np.unique(windows, return_index=True)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)[first]
    if local_categories is None:
        local_categories = diffs.categories(target.sensor_id)
    if categories is None:
        categories = diffs.categories(candidate_sensor)
    local = ParentSpec(
        category=target.category,
        sensor_id=target.sensor_id,
        local_categories=local_categories,
        max_lag=max_lag,
    )
    critical = chi2_quantile(max_lag)
    best = GCScore(0.0, None, None)

    for category in categories:
        causer = SeriesKey(category, candidate_sensor)
        lagged = [Slot(causer, lag) for lag in range(1, max_lag + 1)]
        try:
            rows = build_design_rows(local, diffs, windows, extra_slots=lagged)
        except NoUsableRowsError:
            logger.debug(
                f"{causer.label()} has no usable rows against {target.label()}."
            )
            continue
        row_weights = None
        if weights is not None:
            row_weights = weights[np.isin(windows, rows.timestamps)]
            if row_weights.sum() <= 0:
                continue
        if len(rows) < 2:
            continue

        if patterns is None:
            matches = len(rows)
        else:
            matches = _match_count(target, causer, patterns, max_lag * 60)
        sigma1 = conditional_variance(rows, local, weights=row_weights)
        for slot in lagged:
            sigma2 = conditional_variance(
                rows, local.slots() + [slot], weights=row_weights
            )
            score = matches * max(sigma1 - sigma2, 0.0) / (sigma2 * critical)
            if best.category is None or score > best.score:
                best = GCScore(score, category, slot.lag)

    logger.debug(
        f"gc score of {candidate_sensor} for {target.label()}: {best.score:.4g} "
        f"(category {best.category}, lag {best.lag})"
    )
    return best


def select_neighbors(
    target: SeriesKey,
    candidates: CandidateSet,
    diffs: DiffPanel,
    n_neighbors: int,
    windows: Sequence[int],
    max_lag: int = 3,
    patterns: Optional[Mapping[SeriesKey, PatternSet]] = None,
    local_categories: Optional[Sequence[int]] = None,
    min_score: Optional[float] = None,
    weights: Optional[np.ndarray] = None,
) -> List[Neighbor]:
    """
    Score every candidate and keep the ``n_neighbors`` best, ties broken by the candidate
    order (correlation then distance). With ``min_score`` only candidates scoring above it
    are eligible.
    """
    if n_neighbors <= 0:
        return []
    scored = []
    for rank, candidate in enumerate(candidates):
        if candidate.sensor_id == target.sensor_id:
            continue
        result = gc_score(
            target,
            candidate.sensor_id,
            diffs,
            windows,
            max_lag=max_lag,
            patterns=patterns,
            local_categories=local_categories,
            weights=weights,
        )
        if result.category is None:
            continue
        if min_score is not None and result.score <= min_score:
            continue
        scored.append((-result.score, rank, candidate.sensor_id, result.category))

    scored.sort()
    return [
        Neighbor(sensor_id=sensor_id, category=category)
        for _, _, sensor_id, category in scored[:n_neighbors]
    ]


def init_structure(
    target: SeriesKey,
    candidates: CandidateSet,
    diffs: DiffPanel,
    n_neighbors: int,
    windows: Sequence[int],
    max_lag: int = 3,
    patterns: Optional[Mapping[SeriesKey, PatternSet]] = None,
    local_categories: Optional[Sequence[int]] = None,
    min_score: Optional[float] = None,
) -> ParentSpec:
    """
    The initial parents of a target: all of its local lags and the top ``n_neighbors``
    candidates by gc score. ``n_neighbors = 0`` gives a local-only structure and a value
    above the number of candidates uses every candidate.
    """
    neighbors = select_neighbors(
        target,
        candidates,
        diffs,
        n_neighbors,
        windows,
        max_lag=max_lag,
        patterns=patterns,
        local_categories=local_categories,
        min_score=min_score,
    )
    logger.info(
        f"{target.label()} initial neighbours: {[n.key.label() for n in neighbors]}"
    )
    return ParentSpec(
        category=target.category,
        sensor_id=target.sensor_id,
        local_categories=(
            diffs.categories(target.sensor_id)
            if local_categories is None
            else local_categories
        ),
        neighbors=neighbors,
        max_lag=max_lag,
    )
