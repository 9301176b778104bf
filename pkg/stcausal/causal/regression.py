"""
Weighted least squares fits and the variance and chi-squared quantities the causal score is built from.
"""
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import Field
from scipy import linalg, stats

from stcausal.causal.design import DesignRows, ParentSpec, Slot
from stcausal.common_structures import ResultsConfig
from stcausal.exceptions import NoUsableRowsError, SingularSystemError

RIDGE = 1e-6
VARIANCE_FLOOR = 1e-12


class RegressionFit(ResultsConfig):
    """
    A linear Gaussian regression ``p = mu0 + q.A + eps`` with ``eps ~ N(0, sigma2)``.
    """

    coefficients: np.ndarray = Field(
        ..., description="The coefficients A, one per regressor."
    )
    intercept: float = Field(..., description="The intercept mu0.")
    sigma2: float = Field(..., description="The residual variance.")

    def predict(self, regressors: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(regressors, dtype=float) @ self.coefficients


def fit_wls(
    regressors: np.ndarray,
    response: np.ndarray,
    weights: Optional[np.ndarray] = None,
    ridge: float = RIDGE,
    variance_floor: float = VARIANCE_FLOOR,
) -> RegressionFit:
    """
    Fit a weighted least squares regression with an unpenalized intercept.

    The normal system ``X'WX + ridge*I`` is solved directly, the ridge is not applied to the
    intercept. The residual variance is the weighted mean squared residual.

    Parameters:
        regressors: The T x P regressor matrix, P may be 0.
        response: The T responses.
        weights: Non-negative row weights, unit weights by default.
        ridge: The ridge added to the coefficient block of the normal system.
        variance_floor: The smallest residual variance reported.

    Raises:
        SingularSystemError: If the regularized normal system can still not be solved.
    """
    y = np.asarray(response, dtype=float)
    x = np.asarray(regressors, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != y.size:
        raise ValueError(
            f"There are {x.shape[0]} regressor rows for {y.size} responses."
        )
    w = np.ones(y.size) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise ValueError(f"There are {w.size} weights for {y.size} rows.")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("The weights should be non-negative with a positive sum.")

    design = np.column_stack([np.ones(y.size), x])
    weighted = design * w[:, None]
    normal = design.T @ weighted
    penalty = np.full(design.shape[1], ridge)
    penalty[0] = 0.0
    normal[np.diag_indices_from(normal)] += penalty
    try:
        solution = linalg.solve(normal, weighted.T @ y, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as error:
        raise SingularSystemError(
            f"the {design.shape[1]} x {design.shape[1]} normal system is singular: {error}"
        ) from error
    if not np.all(np.isfinite(solution)):
        raise SingularSystemError("the normal system gave a non-finite solution.")

    residuals = y - design @ solution
    sigma2 = float(np.sum(w * residuals ** 2) / w.sum())
    return RegressionFit(
        coefficients=solution[1:],
        intercept=float(solution[0]),
        sigma2=max(sigma2, variance_floor),
    )


def conditional_variance(
    rows: DesignRows,
    parents: Union[ParentSpec, Sequence[Slot]],
    weights: Optional[np.ndarray] = None,
    ridge: float = RIDGE,
) -> float:
    """
    The residual variance of the response given a subset of the parents, an empty subset
    gives the marginal variance.

    For Gaussian data this equals the Schur complement of the parents' covariance block.
    """
    if len(rows) < 2:
        raise NoUsableRowsError(
            f"a conditional variance needs at least 2 rows but {len(rows)} were given."
        )
    return fit_wls(rows.matrix(parents), rows.p, weights=weights, ridge=ridge).sigma2


def chi2_quantile(df: int, alpha: float = 0.05) -> float:
    """
    The upper ``alpha`` critical value of the chi-squared distribution with ``df`` degrees
    of freedom.
    """
    if df < 1:
        raise ValueError(f"The degrees of freedom should be at least 1, not {df}.")
    if alpha >= 1:
        return 0.0
    if alpha <= 0:
        return float("inf")
    return float(stats.chi2.isf(alpha, df))
