"""
Tests for the confounder cluster model and its EM learning.
"""
import numpy as np
import pytest
from scipy import stats

from stcausal.causal import (
    CausalModel,
    DesignRows,
    EMSettings,
    GbnCluster,
    Neighbor,
    ParentSpec,
    Slot,
    build_design_rows,
    e_step,
    em_learn,
    kmeans_init,
    m_step,
)
from stcausal.causal.em import update_priors
from stcausal.exceptions import (
    ConfigurationError,
    DegenerateClusterError,
    NoUsableRowsError,
    NumericalUnderflowWarning,
)
from stcausal.serializers import deserialize, serialize
from stcausal.tests.causal.conftest import START, TARGET, make_system

LOCAL = ParentSpec(category=1, sensor_id="s1", local_categories=[1], max_lag=1)
DRIVEN = LOCAL.with_neighbors([Neighbor(sensor_id="s2", category=1)])


def toy_rows():
    return DesignRows(
        timestamps=[0, 1, 2],
        response=[0.5, -1.0, 2.0],
        slots=[Slot(TARGET, 1)],
        regressors=[[1.0], [0.0], [-1.0]],
        environment=[[0.0], [3.0], [1.0]],
    )


def toy_clusters():
    return [
        GbnCluster(
            parents=LOCAL,
            coefficients=[0.5],
            intercept=0.0,
            sigma2=1.0,
            env_mean=[0.0],
            env_cov=[[1.0]],
        ),
        GbnCluster(
            parents=LOCAL,
            coefficients=[-1.0],
            intercept=1.0,
            sigma2=2.0,
            env_mean=[3.0],
            env_cov=[[1.0]],
        ),
    ]


def test_e_step():
    """
    The posterior is the normalized product of the prior, the regression density and
    the environmental density.
    """
    rows = toy_rows()
    pi = np.array([[0.5, 0.5], [0.9, 0.1], [0.2, 0.8]])
    gamma, log_likelihood = e_step(toy_clusters(), pi, rows)

    joint = np.column_stack(
        [
            stats.norm.pdf(rows.p, 0.5 * rows.q[:, 0], 1.0)
            * stats.norm.pdf(rows.e[:, 0], 0.0, 1.0),
            stats.norm.pdf(rows.p, 1.0 - rows.q[:, 0], np.sqrt(2.0))
            * stats.norm.pdf(rows.e[:, 0], 3.0, 1.0),
        ]
    ) * pi
    np.testing.assert_allclose(gamma, joint / joint.sum(axis=1, keepdims=True))
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0)
    assert log_likelihood == pytest.approx(np.log(joint.sum(axis=1)).sum())


def test_e_step_dead_rows():
    """
    A row with no prior mass anywhere gets uniform weights and no likelihood.
    """
    pi = np.array([[0.5, 0.5], [0.0, 0.0], [0.5, 0.5]])
    with pytest.warns(NumericalUnderflowWarning):
        gamma, log_likelihood = e_step(toy_clusters(), pi, toy_rows())
    assert gamma[1].tolist() == [0.5, 0.5]
    assert np.isfinite(log_likelihood)


@pytest.mark.parametrize(
    "rule, expected",
    [
        pytest.param("posterior", [[0.5, 0.5], [1.0, 0.0]], id="posterior"),
        pytest.param("scaled", [[1 / 3, 1.0], [2 / 3, 0.0]], id="scaled"),
        pytest.param("normalized", [[0.25, 0.75], [1.0, 0.0]], id="normalized"),
    ],
)
def test_update_priors(rule, expected):
    gamma = np.array([[0.5, 0.5], [1.0, 0.0]])
    np.testing.assert_allclose(update_priors(gamma, rule), expected)


def test_update_priors_default():
    gamma = np.array([[0.2, 0.8], [0.9, 0.1], [0.6, 0.4]])
    pi = update_priors(gamma)
    np.testing.assert_allclose(pi, update_priors(gamma, "normalized"))
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-9)
    assert EMSettings().pi_update == "normalized"


def test_m_step_weighted_fit(rng):
    """
    A cluster with all the posterior mass recovers the weighted regression and the
    moments of its environmental vectors.
    """
    q = rng.normal(size=300)
    rows = DesignRows(
        timestamps=np.arange(300),
        response=2.0 * q + 0.1 * rng.normal(size=300),
        slots=[Slot(TARGET, 1)],
        regressors=q[:, None],
        environment=rng.normal(loc=5.0, size=(300, 2)),
    )
    gamma = np.column_stack([np.ones(300), np.zeros(300)])
    gamma[:10] = [0.0, 1.0]
    update = m_step(gamma, rows, [LOCAL, LOCAL])
    first = update.clusters[0]
    assert first.coefficients[0] == pytest.approx(2.0, abs=0.05)
    np.testing.assert_allclose(first.env_mean, rows.e[10:].mean(axis=0))
    assert update.tags.tolist() == [1] * 10 + [0] * 290
    np.testing.assert_allclose(update.pi, gamma)


def test_m_step_degenerate_cluster():
    gamma = np.array([[1.0, 0.0], [1.0, 0.0], [0.8, 0.2]])
    with pytest.raises(DegenerateClusterError):
        m_step(gamma, toy_rows(), [LOCAL, LOCAL])


def test_kmeans_init(switching_system):
    environment = switching_system.meteo.vectors
    labels = kmeans_init(environment, 2, seed=4)
    assert np.array_equal(labels, kmeans_init(environment, 2, seed=4))
    agreement = np.mean(labels == switching_system.regimes)
    assert max(agreement, 1 - agreement) > 0.95


def test_kmeans_init_errors():
    assert kmeans_init(np.zeros((5, 0)), 1).tolist() == [0] * 5
    with pytest.raises(ConfigurationError):
        kmeans_init(np.zeros((5, 0)), 2)
    with pytest.raises(ValueError):
        kmeans_init(np.zeros((1, 2)), 2)


def test_single_cluster_is_least_squares(system):
    """
    With one cluster EM reduces to ordinary least squares on the parents.
    """
    spec = ParentSpec(
        category=1,
        sensor_id="s1",
        local_categories=[1],
        neighbors=[Neighbor(sensor_id="s2", category=1)],
        max_lag=2,
    )
    rows = build_design_rows(spec, system.diffs, system.hours)
    model, trace = em_learn(rows, spec, 1, settings=EMSettings(ridge=0.0))

    design = np.column_stack([np.ones(len(rows)), rows.matrix(spec)])
    solution, *_ = np.linalg.lstsq(design, rows.p, rcond=None)
    cluster = model.clusters[0]
    assert cluster.intercept == pytest.approx(solution[0], abs=1e-8)
    np.testing.assert_allclose(cluster.coefficients, solution[1:], atol=1e-8)
    assert cluster.sigma2 == pytest.approx(np.mean((rows.p - design @ solution) ** 2))
    assert len(trace) == 2
    assert model.cluster_weights.tolist() == [1.0]
    assert model.environment_dimension == 0


def test_em_needs_enough_rows(system):
    rows = build_design_rows(DRIVEN, system.diffs, system.hours[:9])
    with pytest.raises(NoUsableRowsError):
        em_learn(rows, DRIVEN, 2)


def test_em_recovers_switching_effect(switching_system):
    """
    Two clusters separate the regimes and find the opposite effects of the driver.
    """
    rows = build_design_rows(
        DRIVEN, switching_system.diffs, switching_system.hours, switching_system.meteo
    )
    model, trace = em_learn(rows, DRIVEN, 2, seed=1)

    for before, after in zip(trace, trace[1:]):
        assert after >= before - 1e-8
    assert model.ll_trace == trace
    assert len(trace) <= EMSettings().max_iterations + 1

    driver = [cluster.coefficients[1] for cluster in model.clusters]
    np.testing.assert_allclose(sorted(driver), [-0.87, 0.87], atol=0.1)
    assert model.cluster_weights.sum() == pytest.approx(1.0)

    regimes = switching_system.regimes[rows.timestamps - START]
    agreement = np.mean(model.tags == regimes)
    assert max(agreement, 1 - agreement) > 0.9


@pytest.fixture(scope="module")
def seeded_fits():
    """
    Two cluster fits on twenty independent 2000 hour switching systems, each with the
    trace and the fraction of tags agreeing with the hidden regime.
    """
    fits = []
    for seed in range(20):
        system = make_system(seed=seed, n_hours=2000, strength=0.9, switching=True)
        rows = build_design_rows(DRIVEN, system.diffs, system.hours, system.meteo)
        model, trace = em_learn(rows, DRIVEN, 2, seed=seed)
        regimes = system.regimes[rows.timestamps - START]
        agreement = np.mean(model.tags == regimes)
        fits.append((trace, max(agreement, 1 - agreement)))
    return fits


def test_em_trace_never_decreases(seeded_fits):
    for trace, _ in seeded_fits:
        assert len(trace) >= 2
        for before, after in zip(trace, trace[1:]):
            assert after >= before - 1e-8


def test_em_tags_find_the_regimes(seeded_fits):
    accuracies = [accuracy for _, accuracy in seeded_fits]
    assert np.mean(accuracies) >= 0.95


@pytest.mark.parametrize(
    "settings",
    [
        pytest.param(EMSettings(pi_update="scaled"), id="scaled priors"),
        pytest.param(EMSettings(pi_update="posterior"), id="posterior priors"),
        pytest.param(EMSettings(assignment="hard"), id="hard assignment"),
    ],
)
def test_em_variants(switching_system, settings):
    rows = build_design_rows(
        DRIVEN, switching_system.diffs, switching_system.hours, switching_system.meteo
    )
    model, trace = em_learn(rows, DRIVEN, 2, settings=settings)
    assert model.pi_update == settings.pi_update
    assert np.all(np.isfinite(trace))
    assert model.tags.size == len(rows)


def test_em_settings_validation():
    with pytest.raises(ValueError):
        EMSettings(pi_update="bayes")
    with pytest.raises(ValueError):
        EMSettings(max_iterations=0)


def test_model_document(tmpdir, switching_system):
    """
    A model written to json and read back gives the same document.
    """
    rows = build_design_rows(
        DRIVEN, switching_system.diffs, switching_system.hours, switching_system.meteo
    )
    model, _ = em_learn(rows, DRIVEN, 2, seed=1)
    document = model.to_document()
    assert document["K"] == 2
    assert document["target"] == {"category": 1, "pollutant": "PM25", "sensor_id": "s1"}

    file_name = str(tmpdir.join("model.json"))
    serialize(document, file_name)
    again = CausalModel.from_document(deserialize(file_name))
    assert again.to_document() == document
    assert again.gamma is None
    np.testing.assert_array_equal(again.tags, model.tags)


def test_model_document_version(switching_system):
    rows = build_design_rows(DRIVEN, switching_system.diffs, switching_system.hours)
    model, _ = em_learn(rows, DRIVEN, 1)
    document = model.to_document()
    document["version"] = 99
    with pytest.raises(ConfigurationError):
        CausalModel.from_document(document)


def test_cluster_validation():
    with pytest.raises(ValueError):
        GbnCluster(
            parents=DRIVEN,
            coefficients=[1.0],
            intercept=0.0,
            sigma2=1.0,
            env_mean=[],
            env_cov=[],
        )
    with pytest.raises(ValueError):
        GbnCluster(
            parents=LOCAL,
            coefficients=[1.0],
            intercept=0.0,
            sigma2=1.0,
            env_mean=[0.0, 0.0],
            env_cov=[[1.0, 0.5], [0.0, 1.0]],
        )
