"""
Alternating parameter learning and per-cluster structure reconstruction, prediction and
the accuracy measure.
"""
import logging
import warnings
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from typing_extensions import Literal

from stcausal.causal.design import DesignRows, ParentSpec, build_design_rows
from stcausal.causal.em import CausalModel, EMSettings, em_learn, normalize_log_rows
from stcausal.causal.scoring import init_structure, select_neighbors
from stcausal.common_structures import SeriesKey
from stcausal.datasets.series import DiffPanel, MeteoSeries, PollutantSeries
from stcausal.exceptions import (
    ConfigurationError,
    EmptyClusterWarning,
    InsufficientDataError,
    MissingLagsError,
    NoUsableRowsError,
)
from stcausal.matching.matching import CandidateSet
from stcausal.patterns.mining import PatternSet

logger = logging.getLogger(__name__)

ACCURACY_FLOOR = 1.0


def structure_reconstruction(
    model: CausalModel,
    candidates: CandidateSet,
    diffs: DiffPanel,
    n_neighbors: int,
    patterns: Optional[Mapping[SeriesKey, PatternSet]] = None,
    min_score: Optional[float] = None,
    assignment: Literal["hard", "soft"] = "hard",
) -> List[ParentSpec]:
    """
    Re-select the neighbours of every cluster from gc scores computed on that cluster's
    training rows only, the rows tagged with it or, in ``soft`` mode, all rows weighted
    by their posterior.

    A cluster with fewer than ``2 (ML + NL)`` rows keeps its structure and an
    :class:`EmptyClusterWarning` is issued.
    """
    if model.timestamps is None or model.tags is None:
        raise ConfigurationError(
            f"the model of {model.target.label()} holds no training rows to "
            "reconstruct from."
        )
    if assignment == "soft" and model.gamma is None:
        raise ConfigurationError(
            f"the model of {model.target.label()} holds no posterior for soft "
            "reconstruction."
        )

    structures = []
    for k, cluster in enumerate(model.clusters):
        current = cluster.parents
        if assignment == "hard":
            windows = model.timestamps[model.tags == k]
            weights = None
            size = float(windows.size)
        else:
            windows = model.timestamps
            weights = model.gamma[:, k]
            size = float(weights.sum())
        needed = 2 * current.max_lag * (len(current.local_categories) + n_neighbors)
        if size < needed:
            warnings.warn(
                f"cluster {k} of {model.target.label()} holds {size:.1f} rows, "
                "fewer than the "
                f"{needed} needed to reconstruct its structure, it is kept unchanged.",
                EmptyClusterWarning,
            )
            structures.append(current)
            continue
        neighbors = select_neighbors(
            model.target,
            candidates,
            diffs,
            n_neighbors,
            windows,
            max_lag=current.max_lag,
            patterns=patterns,
            local_categories=current.local_categories,
            min_score=min_score,
            weights=weights,
        )
        logger.debug(
            f"{model.target.label()} cluster {k} neighbours: "
            f"{[n.key.label() for n in neighbors]}"
        )
        structures.append(current.with_neighbors(neighbors))
    return structures


def refine(
    target: SeriesKey,
    candidates: CandidateSet,
    diffs: DiffPanel,
    windows: Sequence[int],
    meteo: Optional[MeteoSeries] = None,
    n_clusters: int = 1,
    n_neighbors: int = 0,
    seed: int = 0,
    max_lag: int = 3,
    patterns: Optional[Mapping[SeriesKey, PatternSet]] = None,
    local_categories: Optional[Sequence[int]] = None,
    min_score: Optional[float] = None,
    settings: Optional[EMSettings] = None,
    reconstruction: Literal["hard", "soft"] = "hard",
    max_outer_iterations: int = 10,
    outer_tolerance: float = 1e-4,
) -> CausalModel:
    """
    Learn the causal model of a target series.

    The parents start from the top ``n_neighbors`` candidates by gc score, then EM
    learning and structure reconstruction alternate until the log-likelihood changes by
    less than
    ``outer_tolerance`` of its size or ``max_outer_iterations`` rounds have run. Without
    neighbours a single EM learning is run.

    Parameters:
        target: The series to model.
        candidates: The candidate causers of the target.
        diffs: The differenced series.
        windows: The epoch hours to train on.
        meteo: The gridded meteorology, required for more than one cluster.
        n_clusters: The number K of confounder clusters.
        n_neighbors: The number N of neighbours per cluster.
        seed: The seed of the cluster initialization.
        max_lag: The lag depth L.
        patterns: The mined patterns, None scores candidates without pattern matching.
        local_categories: The local categories used as parents, every category at the
            sensor by default.
        min_score: Only neighbours with a gc score above this are eligible.
        settings: The EM settings.
        reconstruction: Reconstruct from the ``hard`` tags or the ``soft`` posterior.
        max_outer_iterations: The maximum number of learning and reconstruction rounds.
        outer_tolerance: The relative log-likelihood change which stops the rounds.
    """
    windows = np.asarray(windows, dtype=np.int64)
    normalization = diffs[target]
    structure = init_structure(
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
    structures = [structure] * n_clusters

    previous = None
    for outer in range(1, max_outer_iterations + 1):
        rows = build_design_rows(structures, diffs, windows, meteo)
        model, trace = em_learn(
            rows,
            structures,
            n_clusters,
            seed=seed,
            settings=settings,
            diff_mean=normalization.mean,
            diff_std=normalization.std,
        )
        log_likelihood = trace[-1]
        logger.info(
            f"{target.label()} round {outer}: {len(rows)} rows, "
            f"log-likelihood {log_likelihood:.6f}"
        )
        if n_neighbors == 0:
            break
        converged = previous is not None and abs(
            log_likelihood - previous
        ) < outer_tolerance * abs(log_likelihood)
        if converged:
            break
        previous = log_likelihood
        if outer == max_outer_iterations:
            break
        structures = structure_reconstruction(
            model,
            candidates,
            diffs,
            n_neighbors,
            patterns=patterns,
            min_score=min_score,
            assignment=reconstruction,
        )

    return model.copy(update={"n_neighbors": n_neighbors, "outer_iterations": outer})


def predict_diff(model: CausalModel, rows: DesignRows) -> Tuple[np.ndarray, np.ndarray]:
    """
    Estimate the normalized difference of each row.

    The cluster probabilities combine the cluster weights with the environmental
    density, ``Pr(k) ~ w_k N(e_t | B_k)``, and the estimate is
    ``sum_k Pr(k) (mu0_k + q_t A_k)``.

    Returns:
        The estimates and the T x K cluster probabilities.
    """
    with np.errstate(divide="ignore"):
        log_prior = np.log(model.cluster_weights)
    log_joint = log_prior + np.column_stack(
        [cluster.log_environment_density(rows.e) for cluster in model.clusters]
    )
    probabilities, _ = normalize_log_rows(log_joint)
    means = np.column_stack([cluster.predict(rows) for cluster in model.clusters])
    return (probabilities * means).sum(axis=1), probabilities


def prediction_rows(
    model: CausalModel,
    diffs: DiffPanel,
    hours: Sequence[int],
    meteo: Optional[MeteoSeries] = None,
    strict: bool = True,
) -> DesignRows:
    """
    The rows holding every parent lag of the model at the requested hours.

    Raises:
        MissingLagsError: In strict mode, if any hour lacks a lag or its environmental
            vector.
    """
    hours = np.unique(np.asarray(hours, dtype=np.int64))
    if model.environment_dimension and meteo is None:
        raise ConfigurationError(
            f"the model of {model.target.label()} needs meteorology to predict."
        )
    try:
        rows = build_design_rows(
            model.parents,
            diffs,
            hours,
            meteo if model.environment_dimension else None,
            require_response=False,
        )
    except NoUsableRowsError as error:
        if strict:
            raise MissingLagsError(
                f"no requested hour of {model.target.label()} has every lag."
            ) from error
        raise
    if strict and len(rows) < hours.size:
        missing = np.setdiff1d(hours, rows.timestamps)
        raise MissingLagsError(
            f"{missing.size} hours of {model.target.label()} lack lags, "
            f"the first is {int(missing[0])}."
        )
    return rows


def predict_1h(
    model: CausalModel,
    diffs: DiffPanel,
    series: PollutantSeries,
    hours: Sequence[int],
    meteo: Optional[MeteoSeries] = None,
    strict: bool = True,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predict the concentration one hour ahead.

    The normalized difference estimate is mapped back to a raw difference and added to
    the reading of the previous hour.

    Returns:
        The predicted epoch hours and the concentration estimates. Outside strict mode
        hours without their lags or previous reading are left out.

    Raises:
        MissingLagsError: In strict mode, if an hour lacks a lag or its previous
            reading.
    """
    rows = prediction_rows(model, diffs, hours, meteo, strict=strict)
    last = series.values_at(rows.timestamps - 1)
    known = ~np.isnan(last)
    if not known.all():
        if strict:
            raise MissingLagsError(
                f"{int((~known).sum())} hours of {model.target.label()} have no "
                "reading the hour before."
            )
        rows = rows.subset(known)
        last = last[known]
    estimates, _ = predict_diff(model, rows)
    return rows.timestamps, last + estimates * model.diff_std + model.diff_mean


def accuracy_eval(
    estimates: Sequence[float], truths: Sequence[float], floor: float = ACCURACY_FLOOR
) -> float:
    """
    The accuracy ``1 - mean(|estimate - truth| / max(truth, floor))`` of concentration
    estimates.

    Raises:
        InsufficientDataError: If there is nothing to evaluate.
    """
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape:
        raise ValueError(
            f"There are {estimates.size} estimates for {truths.size} truths."
        )
    if truths.size == 0:
        raise InsufficientDataError("there are no test timestamps to evaluate.")
    return float(1.0 - np.mean(np.abs(estimates - truths) / np.maximum(truths, floor)))


def held_out_accuracy(
    model: CausalModel,
    diffs: DiffPanel,
    series: PollutantSeries,
    hours: Sequence[int],
    meteo: Optional[MeteoSeries] = None,
) -> Tuple[float, int]:
    """
    The accuracy of the model on the given hours, skipping hours without lags or a
    reading.

    Returns:
        The accuracy and the number of hours it was measured on.

    Raises:
        InsufficientDataError: If none of the hours can be evaluated.
    """
    try:
        predicted, estimates = predict_1h(
            model, diffs, series, hours, meteo, strict=False
        )
    except NoUsableRowsError:
        predicted, estimates = np.zeros(0, dtype=np.int64), np.zeros(0)
    truths = series.values_at(predicted)
    known = ~np.isnan(truths)
    return accuracy_eval(estimates[known], truths[known]), int(known.sum())
