import numpy as np
import pytest
import statsmodels.api as sm

from stcausal.causal import (
    DesignRows,
    Neighbor,
    ParentSpec,
    Slot,
    build_design_rows,
    chi2_quantile,
    conditional_variance,
    fit_wls,
)
from stcausal.common_structures import SeriesKey
from stcausal.datasets import DiffPanel, DiffSeries
from stcausal.exceptions import NoUsableRowsError, SingularSystemError


def test_fit_wls_exact_line():
    x = np.arange(10.0)
    fit = fit_wls(x, 2.0 + 3.0 * x)
    assert fit.intercept == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(fit.coefficients, [3.0], atol=1e-6)
    assert fit.sigma2 == pytest.approx(0.0, abs=1e-9)


def test_fit_wls_matches_statsmodels(rng):
    """
    Without a ridge the fit is the weighted least squares solution.
    """
    x = rng.normal(size=(200, 3))
    y = 1.0 + x @ np.array([0.5, -1.0, 2.0]) + rng.normal(size=200)
    w = rng.uniform(0.1, 2.0, size=200)

    fit = fit_wls(x, y, weights=w, ridge=0.0)
    reference = sm.WLS(y, sm.add_constant(x), weights=w).fit()
    np.testing.assert_allclose(
        np.concatenate([[fit.intercept], fit.coefficients]), reference.params
    )
    residuals = y - fit.predict(x)
    assert fit.sigma2 == pytest.approx(np.sum(w * residuals ** 2) / w.sum())


def test_fit_wls_zero_weights_ignore_rows(rng):
    x = rng.normal(size=50)
    y = 1.0 - 2.0 * x
    y[:5] = 1000.0
    w = np.ones(50)
    w[:5] = 0.0
    fit = fit_wls(x, y, weights=w)
    assert fit.intercept == pytest.approx(1.0, abs=1e-4)
    assert fit.coefficients[0] == pytest.approx(-2.0, abs=1e-4)


def test_fit_wls_no_regressors(rng):
    y = rng.normal(size=100)
    fit = fit_wls(np.zeros((100, 0)), y)
    assert fit.coefficients.size == 0
    assert fit.intercept == pytest.approx(y.mean())
    assert fit.sigma2 == pytest.approx(np.var(y))


def test_fit_wls_singular():
    """
    A regressor which is zero everywhere leaves the unregularized system singular.
    """
    x = np.column_stack([np.arange(10.0), np.zeros(10)])
    with pytest.raises(SingularSystemError):
        fit_wls(x, np.arange(10.0), ridge=0.0)
    # the ridge makes it solvable
    fit = fit_wls(x, np.arange(10.0))
    assert fit.coefficients[1] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize(
    "weights",
    [
        pytest.param(np.ones(3), id="wrong length"),
        pytest.param(-np.ones(4), id="negative"),
        pytest.param(np.zeros(4), id="zero sum"),
    ],
)
def test_fit_wls_bad_weights(weights):
    with pytest.raises(ValueError):
        fit_wls(np.arange(4.0), np.arange(4.0), weights=weights)


@pytest.mark.parametrize(
    "df, expected",
    [
        pytest.param(1, 3.8415, id="one lag"),
        pytest.param(3, 7.8147, id="three lags"),
    ],
)
def test_chi2_quantile(df, expected):
    assert chi2_quantile(df) == pytest.approx(expected, abs=1e-4)


def test_chi2_quantile_bad_df():
    with pytest.raises(ValueError):
        chi2_quantile(0)


def make_panel():
    """
    Two sensors over ten hours with a hole at hour 5 of the first one.
    """
    target = np.arange(1.0, 11.0)
    target[4] = np.nan
    return DiffPanel(
        [
            DiffSeries(
                sensor_id="a",
                category=1,
                timestamps=np.arange(1, 11),
                values=target,
                mean=0.0,
                std=1.0,
            ),
            DiffSeries(
                sensor_id="b",
                category=2,
                timestamps=np.arange(1, 11),
                values=np.arange(1.0, 11.0) * 10,
                mean=0.0,
                std=1.0,
            ),
        ]
    )


def test_build_design_rows():
    """
    A row is only kept when the response and every lag exist.
    """
    spec = ParentSpec(
        category=1,
        sensor_id="a",
        local_categories=[1],
        neighbors=[Neighbor(sensor_id="b", category=2)],
        max_lag=2,
    )
    rows = build_design_rows(spec, make_panel(), range(0, 12))
    assert rows.slots == [
        Slot(SeriesKey(1, "a"), 1),
        Slot(SeriesKey(1, "a"), 2),
        Slot(SeriesKey(2, "b"), 1),
        Slot(SeriesKey(2, "b"), 2),
    ]
    # hours 5 to 7 need the missing value, hours 0 to 2 and 11 fall off the ends
    assert rows.timestamps.tolist() == [3, 4, 8, 9, 10]
    assert rows.p.tolist() == [3.0, 4.0, 8.0, 9.0, 10.0]
    assert rows.q[0].tolist() == [2.0, 1.0, 20.0, 10.0]
    assert rows.dimension == 0
    assert rows.matrix([Slot(SeriesKey(2, "b"), 2)]).ravel().tolist() == [
        10.0,
        20.0,
        60.0,
        70.0,
        80.0,
    ]


def test_build_design_rows_without_response():
    spec = ParentSpec(category=1, sensor_id="a", local_categories=[1], max_lag=1)
    rows = build_design_rows(spec, make_panel(), [5, 11], require_response=False)
    assert rows.timestamps.tolist() == [5, 11]
    assert np.isnan(rows.p).all()


def test_build_design_rows_none_usable():
    spec = ParentSpec(category=1, sensor_id="a", local_categories=[1], max_lag=3)
    with pytest.raises(NoUsableRowsError):
        build_design_rows(spec, make_panel(), [0, 1, 2])


def test_design_rows_missing_columns():
    spec = ParentSpec(category=1, sensor_id="a", local_categories=[1], max_lag=1)
    rows = build_design_rows(spec, make_panel(), range(2, 10))
    with pytest.raises(KeyError):
        rows.matrix([Slot(SeriesKey(2, "b"), 1)])


def test_parent_spec_validation():
    with pytest.raises(ValueError):
        ParentSpec(
            category=1,
            sensor_id="a",
            local_categories=[1],
            neighbors=[Neighbor(sensor_id="a", category=2)],
        )
    with pytest.raises(ValueError):
        ParentSpec(category=1, sensor_id="a", local_categories=[1, 1])


def test_parent_spec_document():
    spec = ParentSpec(
        category=1,
        sensor_id="a",
        local_categories=[2, 1],
        neighbors=[Neighbor(sensor_id="b", category=3)],
    )
    document = spec.to_document()
    assert document == {
        "local": ["PM25", "PM10"],
        "neighbors": [{"sensor": "b", "category": 3}],
        "L": 3,
    }
    assert ParentSpec.from_document(SeriesKey(1, "a"), document) == spec


def test_conditional_variance(rng):
    """
    Conditioning on the true parent leaves the noise variance, on nothing the marginal.
    """
    cause = rng.normal(size=500)
    effect = 2.0 * cause + 0.5 * rng.normal(size=500)
    slot = Slot(SeriesKey(1, "b"), 1)
    rows = DesignRows(
        timestamps=np.arange(500),
        response=effect,
        slots=[slot],
        regressors=cause[:, None],
        environment=np.zeros((500, 0)),
    )
    assert conditional_variance(rows, []) == pytest.approx(np.var(effect))
    assert conditional_variance(rows, [slot]) == pytest.approx(0.25, rel=0.15)


def test_conditional_variance_too_few_rows():
    rows = DesignRows(
        timestamps=[0],
        response=[1.0],
        slots=[],
        regressors=np.zeros((1, 0)),
        environment=np.zeros((1, 0)),
    )
    with pytest.raises(NoUsableRowsError):
        conditional_variance(rows, [])
