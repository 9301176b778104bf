"""
Structure recovery baselines: pairwise Granger tests and Lasso-Granger regressions.
"""
import logging
import warnings
from typing import List, Optional, Set, Tuple

import numpy as np
from pydantic import Field, NonNegativeInt, PositiveInt, validator
from scipy import stats
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso, LassoCV, LinearRegression
from statsmodels.regression.linear_model import OLS
from statsmodels.tools.tools import add_constant
from statsmodels.tsa.tsatools import lagmat, lagmat2ds

from stcausal.common_structures import ResultsConfig
from stcausal.exceptions import NonConvergenceError

logger = logging.getLogger(__name__)

LASSO_TOLERANCE = 1e-8
LASSO_MAX_SWEEPS = 10_000


class RecoveredGraph(ResultsConfig):
    """
    A directed graph over the series indices recovered by one method.
    """

    method: str = Field(..., description="The method which recovered the graph.")
    n_nodes: PositiveInt = Field(..., description="The number of series.")
    edges: List[Tuple[NonNegativeInt, NonNegativeInt]] = Field(
        default_factory=list, description="The (cause, effect) edges."
    )

    @validator("edges")
    def _sort_edges(cls, edges):
        return sorted(set(tuple(edge) for edge in edges))

    def edge_set(self) -> Set[Tuple[int, int]]:
        return set(self.edges)

    def to_dot(self) -> str:
        name = self.method.replace("-", "_")
        lines = [f"digraph {name} {{"]
        lines.extend(f'  "x{i}";' for i in range(self.n_nodes))
        lines.extend(f'  "x{i}" -> "x{j}";' for i, j in self.edges)
        lines.append("}")
        return "\n".join(lines) + "\n"


def granger_chi2(
    effect: np.ndarray, cause: np.ndarray, max_lag: int
) -> Tuple[float, float]:
    """
    The chi-squared form of the Granger test of ``cause -> effect``,
    ``T (RSS_restricted - RSS_unrestricted) / RSS_unrestricted`` with ``max_lag`` degrees
    of freedom.

    Returns:
        The statistic and its p-value.
    """
    lagged = lagmat2ds(np.column_stack([effect, cause]), max_lag, trim="both", dropex=1)
    own = add_constant(lagged[:, 1 : max_lag + 1], prepend=False, has_constant="add")
    joint = add_constant(lagged[:, 1:], prepend=False, has_constant="add")
    restricted = OLS(lagged[:, 0], own).fit()
    unrestricted = OLS(lagged[:, 0], joint).fit()
    statistic = (
        unrestricted.nobs * (restricted.ssr - unrestricted.ssr) / unrestricted.ssr
    )
    return float(statistic), float(stats.chi2.sf(statistic, max_lag))


def pairwise_granger_graph(
    series: np.ndarray, max_lag: int, alpha: float = 0.05
) -> RecoveredGraph:
    """
    Test every ordered pair of series separately, ``i -> j`` is an edge when the Granger
    test rejects at level ``alpha``.
    """
    series = np.asarray(series, dtype=float)
    n_nodes = series.shape[1]
    edges = []
    for effect in range(n_nodes):
        for cause in range(n_nodes):
            if cause == effect:
                continue
            _, p_value = granger_chi2(series[:, effect], series[:, cause], max_lag)
            if p_value < alpha:
                edges.append((cause, effect))
    logger.info(f"pairwise Granger found {len(edges)} edges among {n_nodes} series.")
    return RecoveredGraph(method="granger", n_nodes=n_nodes, edges=edges)


def _alpha_grid(
    lagged: np.ndarray, response: np.ndarray, n_alphas: int = 30
) -> np.ndarray:
    """A log grid of penalties down from the smallest one giving an all-zero fit."""
    centred = lagged - lagged.mean(axis=0)
    largest = np.max(np.abs(centred.T @ (response - response.mean()))) / response.size
    return largest * np.logspace(0, -3, n_alphas)


def one_standard_error_alpha(search: LassoCV) -> float:
    """
    The largest penalty of a fitted ``LassoCV`` whose mean fold error is within one
    standard error of the smallest mean fold error.
    """
    errors = np.asarray(search.mse_path_)
    mean = errors.mean(axis=1)
    best = int(np.argmin(mean))
    bound = mean[best] + errors[best].std(ddof=1) / np.sqrt(errors.shape[1])
    return float(np.max(search.alphas_[mean <= bound]))


def _lasso_coefficients(
    lagged: np.ndarray,
    response: np.ndarray,
    penalty: Optional[float],
    seed: int,
    one_standard_error: bool = True,
) -> np.ndarray:
    if penalty == 0:
        return LinearRegression().fit(lagged, response).coef_
    if np.ptp(response) == 0:
        return np.zeros(lagged.shape[1])
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            if penalty is None:
                search = LassoCV(
                    cv=5,
                    alphas=_alpha_grid(lagged, response),
                    max_iter=LASSO_MAX_SWEEPS,
                    tol=LASSO_TOLERANCE,
                    random_state=seed,
                ).fit(lagged, response)
                if not one_standard_error:
                    return search.coef_
                penalty = one_standard_error_alpha(search)
            model = Lasso(
                alpha=penalty,
                max_iter=LASSO_MAX_SWEEPS,
                tol=LASSO_TOLERANCE,
                random_state=seed,
            )
            return model.fit(lagged, response).coef_
        except ConvergenceWarning as warning:
            raise NonConvergenceError(
                f"coordinate descent did not converge in {LASSO_MAX_SWEEPS} sweeps: {warning}"
            ) from warning


def lasso_granger_graph(
    series: np.ndarray,
    max_lag: int,
    penalty: Optional[float] = None,
    seed: int = 0,
    one_standard_error: bool = True,
) -> RecoveredGraph:
    """
    Regress each series on the lags 1..``max_lag`` of every series with an L1 penalty,
    ``i -> j`` is an edge when any lag of ``i`` keeps a nonzero coefficient for ``j``.

    Parameters:
        series: The T x n series.
        max_lag: The lag depth.
        penalty: The L1 penalty, None picks it by 5-fold cross validation and 0 fits
            ordinary least squares.
        seed: The seed of the coordinate descent.
        one_standard_error: When the penalty is cross validated, refit with the
            largest penalty within one standard error of the best fold error instead
            of the best penalty itself.

    Raises:
        NonConvergenceError: If coordinate descent does not converge.
    """
    if penalty is not None and penalty < 0:
        raise ValueError("The lasso penalty can not be negative.")
    series = np.asarray(series, dtype=float)
    n_nodes = series.shape[1]
    # columns are ordered lag 1 of every series, then lag 2 and so on
    lagged, current = lagmat(series, max_lag, trim="both", original="sep")
    edges = []
    for effect in range(n_nodes):
        coefficients = _lasso_coefficients(
            lagged, current[:, effect], penalty, seed, one_standard_error
        )
        active = np.abs(coefficients.reshape(max_lag, n_nodes)) > 0
        for cause in np.flatnonzero(active.any(axis=0)):
            if cause != effect:
                edges.append((int(cause), effect))
    logger.info(f"Lasso-Granger found {len(edges)} edges among {n_nodes} series.")
    return RecoveredGraph(method="lasso-granger", n_nodes=n_nodes, edges=edges)
