"""
The Gaussian Bayesian network with latent confounder clusters and its EM parameter
learning.

Each cluster k explains the target by its own linear Gaussian regression on its parents
and describes the environmental vectors it covers by a Gaussian ``N(mu_Bk, Sigma_Bk)``.
"""
import logging
import warnings
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    Field,
    NonNegativeInt,
    PositiveInt,
    confloat,
    root_validator,
    validator,
)
from scipy import special, stats
from sklearn.cluster import KMeans
from typing_extensions import Literal

from stcausal.causal.design import DesignRows, ParentSpec
from stcausal.causal.regression import fit_wls
from stcausal.common_structures import (
    ResultsConfig,
    SeriesKey,
    SettingsConfig,
    category_index,
    pollutant_name,
)
from stcausal.exceptions import (
    ConfigurationError,
    DegenerateClusterError,
    NoUsableRowsError,
    NumericalUnderflowWarning,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MIN_CLUSTER_MASS = 1.0


class EMSettings(SettingsConfig):
    """
    The settings of the EM parameter learning.
    """

    max_iterations: PositiveInt = Field(
        10, description="The maximum number of EM iterations."
    )
    tolerance: confloat(ge=0) = Field(
        1e-6,
        description="Stop once the log-likelihood changes by less than this fraction "
        "of its size.",
    )
    pi_update: Literal["posterior", "normalized", "scaled"] = Field(
        "normalized",
        description="How the per-timestamp priors are updated: the posterior divided "
        "by the cluster mass then renormalized per timestamp, the posterior itself, "
        "or the posterior divided by the cluster mass only.",
    )
    assignment: Literal["soft", "hard"] = Field(
        "soft",
        description="Fit the cluster parameters with the posterior weights or with the "
        "hard assignment.",
    )
    ridge: confloat(ge=0) = Field(
        1e-6, description="The ridge of the cluster regressions."
    )
    covariance_regularization: confloat(ge=0) = Field(
        1e-6,
        description="The multiple of the mean variance added to the diagonal of each "
        "environmental covariance.",
    )
    variance_floor: confloat(gt=0) = Field(
        1e-12, description="The smallest residual variance of a cluster regression."
    )


class GbnCluster(ResultsConfig):
    """
    One confounder cluster: a linear Gaussian regression of the target on the cluster's
    parents and a Gaussian over the environmental vectors.
    """

    parents: ParentSpec = Field(
        ..., description="The parents of the target in this cluster."
    )
    coefficients: np.ndarray = Field(
        ..., description="The regression coefficients A_k."
    )
    intercept: float = Field(..., description="The intercept mu0_k.")
    sigma2: confloat(gt=0) = Field(..., description="The residual variance.")
    env_mean: np.ndarray = Field(..., description="The environmental mean mu_Bk.")
    env_cov: np.ndarray = Field(
        ..., description="The environmental covariance Sigma_Bk."
    )

    @validator("coefficients", "env_mean", pre=True)
    def _as_vector(cls, array):
        return np.asarray(array, dtype=float).reshape(-1)

    @validator("env_cov", pre=True)
    def _check_covariance(cls, covariance, values):
        covariance = np.asarray(covariance, dtype=float)
        dimension = (
            values["env_mean"].size if "env_mean" in values else covariance.shape[0]
        )
        covariance = covariance.reshape(dimension, dimension)
        if not np.allclose(covariance, covariance.T):
            raise ValueError("The environmental covariance should be symmetric.")
        return covariance

    @root_validator(skip_on_failure=True)
    def _check_coefficients(cls, values):
        n_slots = len(values["parents"].slots())
        if values["coefficients"].size != n_slots:
            raise ValueError(
                f"There are {values['coefficients'].size} coefficients for "
                f"{n_slots} parent slots."
            )
        return values

    @property
    def dimension(self) -> int:
        return self.env_mean.size

    def predict(self, rows: DesignRows) -> np.ndarray:
        """The conditional mean of the target difference on each row."""
        return self.intercept + rows.matrix(self.parents) @ self.coefficients

    def log_response_density(self, rows: DesignRows) -> np.ndarray:
        return stats.norm.logpdf(
            rows.p, loc=self.predict(rows), scale=np.sqrt(self.sigma2)
        )

    def log_environment_density(self, environment: np.ndarray) -> np.ndarray:
        environment = np.asarray(environment, dtype=float)
        if self.dimension == 0:
            return np.zeros(environment.shape[0])
        return np.atleast_1d(
            stats.multivariate_normal.logpdf(
                environment, mean=self.env_mean, cov=self.env_cov, allow_singular=True
            )
        )

    def to_document(self) -> Dict:
        return {
            "parents": self.parents.to_document(),
            "A": self.coefficients.tolist(),
            "mu0": self.intercept,
            "sigma2": self.sigma2,
            "B_mean": self.env_mean.tolist(),
            "B_cov": self.env_cov.tolist(),
        }

    @classmethod
    def from_document(cls, target: SeriesKey, document: Dict) -> "GbnCluster":
        return cls(
            parents=ParentSpec.from_document(target, document["parents"]),
            coefficients=document["A"],
            intercept=document["mu0"],
            sigma2=document["sigma2"],
            env_mean=document["B_mean"],
            env_cov=document["B_cov"],
        )


class CausalModel(ResultsConfig):
    """
    A trained causal model of one target series.

    The per-timestamp priors, posteriors and tags of the training rows are kept in
    memory after training but only the tags are persisted.
    """

    category: PositiveInt = Field(..., description="The target category.")
    sensor_id: str = Field(..., description="The target sensor.")
    max_lag: PositiveInt = Field(..., description="The lag depth L.")
    n_neighbors: NonNegativeInt = Field(
        ..., description="The number N of neighbours requested per cluster."
    )
    clusters: List[GbnCluster] = Field(..., description="The K clusters.")
    cluster_weights: np.ndarray = Field(
        ..., description="The fraction of training timestamps tagged with each cluster."
    )
    ll_trace: List[float] = Field(
        default_factory=list, description="The log-likelihood after each EM iteration."
    )
    timestamps: Optional[np.ndarray] = Field(
        None, description="The epoch hours of the training rows."
    )
    tags: Optional[np.ndarray] = Field(
        None, description="The cluster tag of each training row."
    )
    pi: Optional[np.ndarray] = Field(None, description="The T x K prior matrix.")
    gamma: Optional[np.ndarray] = Field(None, description="The T x K posterior matrix.")
    pi_update: str = Field(
        "normalized", description="The prior update rule used in training."
    )
    diff_mean: float = Field(
        0.0, description="The mean of the raw target differences, to de-normalize."
    )
    diff_std: float = Field(
        1.0, description="The spread of the raw target differences, to de-normalize."
    )
    outer_iterations: NonNegativeInt = Field(
        1, description="The number of learning and reconstruction rounds run."
    )
    validation_accuracy: Optional[float] = Field(
        None, description="The held-out accuracy of this model."
    )
    local_validation_accuracy: Optional[float] = Field(
        None,
        description="The held-out accuracy of the local-only model on those windows.",
    )

    @validator("cluster_weights", pre=True)
    def _check_weights(cls, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.size and abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"The cluster weights sum to {weights.sum()} not 1.")
        return weights

    @property
    def target(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def parents(self) -> List[ParentSpec]:
        return [cluster.parents for cluster in self.clusters]

    @property
    def log_likelihood(self) -> float:
        return self.ll_trace[-1] if self.ll_trace else float("nan")

    @property
    def environment_dimension(self) -> int:
        return self.clusters[0].dimension

    def to_document(self) -> Dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "target": {
                "category": self.category,
                "pollutant": pollutant_name(self.category),
                "sensor_id": self.sensor_id,
            },
            "K": self.n_clusters,
            "N": self.n_neighbors,
            "L": self.max_lag,
            "clusters": [cluster.to_document() for cluster in self.clusters],
            "cluster_weights": self.cluster_weights.tolist(),
            "ll_trace": list(self.ll_trace),
            "pi_update": self.pi_update,
            "normalization": {"mean": self.diff_mean, "std": self.diff_std},
            "outer_iterations": self.outer_iterations,
            "validation_accuracy": self.validation_accuracy,
            "local_validation_accuracy": self.local_validation_accuracy,
            "training": {
                "timestamps": (
                    [] if self.timestamps is None else self.timestamps.tolist()
                ),
                "tags": [] if self.tags is None else self.tags.tolist(),
            },
        }

    @classmethod
    def from_document(cls, document: Dict) -> "CausalModel":
        version = document.get("version")
        if version != MODEL_FORMAT_VERSION:
            raise ConfigurationError(
                f"the model document has version {version} but version "
                f"{MODEL_FORMAT_VERSION} is supported."
            )
        target_doc = document["target"]
        target = SeriesKey(
            target_doc.get("category") or category_index(target_doc["pollutant"]),
            target_doc["sensor_id"],
        )
        training = document.get("training", {})
        return cls(
            category=target.category,
            sensor_id=target.sensor_id,
            max_lag=document["L"],
            n_neighbors=document["N"],
            clusters=[
                GbnCluster.from_document(target, c) for c in document["clusters"]
            ],
            cluster_weights=document["cluster_weights"],
            ll_trace=document["ll_trace"],
            pi_update=document.get("pi_update", "normalized"),
            diff_mean=document.get("normalization", {}).get("mean", 0.0),
            diff_std=document.get("normalization", {}).get("std", 1.0),
            outer_iterations=document.get("outer_iterations", 1),
            validation_accuracy=document.get("validation_accuracy"),
            local_validation_accuracy=document.get("local_validation_accuracy"),
            timestamps=_optional_array(training.get("timestamps"), np.int64),
            tags=_optional_array(training.get("tags"), int),
        )


def _optional_array(values: Optional[List], dtype) -> Optional[np.ndarray]:
    return np.asarray(values, dtype=dtype) if values else None


def kmeans_init(environment: np.ndarray, n_clusters: int, seed: int = 0) -> np.ndarray:
    """
    Hard cluster labels of the environmental vectors by k-means with k-means++ seeding,
    at most 100 Lloyd iterations run until the assignments are stable.
    """
    environment = np.asarray(environment, dtype=float)
    n_rows = environment.shape[0]
    if n_clusters < 1:
        raise ValueError("There should be at least one cluster.")
    if n_rows < n_clusters:
        raise ValueError(f"{n_rows} rows can not be split into {n_clusters} clusters.")
    if n_clusters == 1:
        return np.zeros(n_rows, dtype=int)
    if environment.ndim != 2 or environment.shape[1] == 0:
        raise ConfigurationError(
            "more than one confounder cluster needs environmental vectors, provide "
            "meteorology or use one cluster."
        )
    kmeans = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=1,
        max_iter=100,
        tol=0.0,
        random_state=seed,
        algorithm="lloyd",
    )
    return kmeans.fit_predict(environment).astype(int)


def _one_hot(labels: np.ndarray, n_clusters: int) -> np.ndarray:
    gamma = np.zeros((labels.size, n_clusters))
    gamma[np.arange(labels.size), labels] = 1.0
    return gamma


def _log_densities(clusters: Sequence[GbnCluster], rows: DesignRows) -> np.ndarray:
    return np.column_stack(
        [
            cluster.log_response_density(rows) + cluster.log_environment_density(rows.e)
            for cluster in clusters
        ]
    )


def normalize_log_rows(log_joint: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalize each row of log weights in log space.

    Returns:
        The normalized probabilities and the log normalizer of each row. A row whose
        entries are all ``-inf`` becomes uniform, has a ``-inf`` normalizer and raises a
        :class:`NumericalUnderflowWarning`.
    """
    n_rows, n_clusters = log_joint.shape
    normalizer = special.logsumexp(log_joint, axis=1)
    dead = ~np.isfinite(normalizer)
    probabilities = np.empty_like(log_joint)
    with np.errstate(invalid="ignore"):
        probabilities[~dead] = np.exp(log_joint[~dead] - normalizer[~dead, None])
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} of {n_rows} rows have zero density under every "
            "cluster, they are given uniform weights.",
            NumericalUnderflowWarning,
        )
        probabilities[dead] = 1.0 / n_clusters
        normalizer[dead] = -np.inf
    return probabilities, normalizer


def e_step(
    clusters: Sequence[GbnCluster], pi: np.ndarray, rows: DesignRows
) -> Tuple[np.ndarray, float]:
    """
    The posterior cluster memberships of the rows,
    ``gamma_tk ~ pi_tk N(p_t | mu0_k + q_t A_k, sigma2_k) N(e_t | B_k)``, evaluated in
    log space.

    Returns:
        The T x K posterior and the log-likelihood summed over the rows with finite
        density.
    """
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
    gamma, normalizer = normalize_log_rows(log_pi + _log_densities(clusters, rows))
    finite = np.isfinite(normalizer)
    return gamma, float(normalizer[finite].sum())


def fit_cluster(
    rows: DesignRows, parents: ParentSpec, weights: np.ndarray, settings: EMSettings
) -> GbnCluster:
    """Fit the regression and environmental Gaussian of one cluster from row weights."""
    regression = fit_wls(
        rows.matrix(parents),
        rows.p,
        weights=weights,
        ridge=settings.ridge,
        variance_floor=settings.variance_floor,
    )
    mass = weights.sum()
    env_mean = weights @ rows.e / mass
    centred = rows.e - env_mean
    env_cov = (centred * weights[:, None]).T @ centred / mass
    if rows.dimension:
        scale = np.trace(env_cov) / rows.dimension
        regularizer = settings.covariance_regularization * (scale if scale > 0 else 1.0)
        env_cov = env_cov + regularizer * np.eye(rows.dimension)
    return GbnCluster(
        parents=parents,
        coefficients=regression.coefficients,
        intercept=regression.intercept,
        sigma2=regression.sigma2,
        env_mean=env_mean,
        env_cov=(env_cov + env_cov.T) / 2,
    )


class MStep(NamedTuple):
    clusters: List[GbnCluster]
    pi: np.ndarray
    tags: np.ndarray


def update_priors(gamma: np.ndarray, rule: str = "normalized") -> np.ndarray:
    """
    The per-timestamp cluster priors from the posterior.

    ``posterior`` uses the posterior itself, ``scaled`` divides each column by its mass
    and ``normalized`` then rescales every row to sum to 1.
    """
    if rule == "posterior":
        return gamma.copy()
    scaled = gamma / gamma.sum(axis=0)
    if rule == "scaled":
        return scaled
    return scaled / scaled.sum(axis=1, keepdims=True)


def m_step(
    gamma: np.ndarray,
    rows: DesignRows,
    parents: Sequence[ParentSpec],
    settings: Optional[EMSettings] = None,
) -> MStep:
    """
    Refit every cluster from the posterior and update the priors and the tags.

    The tag of a timestamp is the cluster with the largest prior.

    Raises:
        DegenerateClusterError: If a cluster holds less than one row of posterior mass.
    """
    settings = settings or EMSettings()
    masses = gamma.sum(axis=0)
    empty = np.flatnonzero(masses < MIN_CLUSTER_MASS)
    if empty.size:
        raise DegenerateClusterError(
            f"clusters {empty.tolist()} of {parents[0].target.label()} have less than "
            "one row of mass."
        )
    if settings.assignment == "hard":
        weights = _one_hot(np.argmax(gamma, axis=1), gamma.shape[1])
        if np.any(weights.sum(axis=0) == 0):
            raise DegenerateClusterError(
                f"a cluster of {parents[0].target.label()} has no hard-assigned rows."
            )
    else:
        weights = gamma
    clusters = [
        fit_cluster(rows, parents[k], weights[:, k], settings)
        for k in range(gamma.shape[1])
    ]
    pi = update_priors(gamma, settings.pi_update)
    return MStep(clusters, pi, np.argmax(pi, axis=1))


def _reseed(gamma: np.ndarray, row_log_likelihood: np.ndarray) -> np.ndarray:
    """Hand the worst explained rows to every cluster which lost its mass."""
    n_rows, n_clusters = gamma.shape
    gamma = gamma.copy()
    empty = np.flatnonzero(gamma.sum(axis=0) < MIN_CLUSTER_MASS)
    share = int(np.ceil(n_rows / n_clusters))
    order = np.argsort(row_log_likelihood, kind="stable")
    for index, k in enumerate(empty):
        chosen = order[index * share : (index + 1) * share]
        gamma[chosen] = 0.0
        gamma[chosen, k] = 1.0
    return gamma


def em_learn(
    rows: DesignRows,
    parents: Union[ParentSpec, Sequence[ParentSpec]],
    n_clusters: int,
    seed: int = 0,
    settings: Optional[EMSettings] = None,
    diff_mean: float = 0.0,
    diff_std: float = 1.0,
) -> Tuple[CausalModel, List[float]]:
    """
    Learn the cluster parameters by expectation maximization.

    The clusters start from k-means on the environmental vectors with uniform priors,
    then M and E steps alternate until the log-likelihood changes by less than
    ``settings.tolerance`` of its size or ``settings.max_iterations`` rounds have run. A
    cluster which loses its mass is reseeded once from the worst explained rows.

    Parameters:
        rows: The training rows, holding the columns of every cluster's parents.
        parents: The shared parent structure or one per cluster.
        n_clusters: The number K of confounder clusters.
        seed: The seed of the k-means initialization.
        settings: The EM settings.
        diff_mean: The raw mean of the target differences, kept for prediction.
        diff_std: The raw spread of the target differences, kept for prediction.

    Returns:
        The trained model and the log-likelihood trace, starting at the initialization.

    Raises:
        NoUsableRowsError: With fewer than ``max(K (P + 2), 2K)`` rows for P parent
            slots.
        DegenerateClusterError: If a cluster is still empty after reseeding.
    """
    settings = settings or EMSettings()
    specs = [parents] * n_clusters if isinstance(parents, ParentSpec) else list(parents)
    if len(specs) != n_clusters:
        raise ValueError(
            f"There are {len(specs)} parent structures for {n_clusters} clusters."
        )
    n_slots = max(len(spec.slots()) for spec in specs)
    needed = max(n_clusters * (n_slots + 2), 2 * n_clusters)
    if len(rows) < needed:
        raise NoUsableRowsError(
            f"{specs[0].target.label()} has {len(rows)} usable rows but {needed} "
            f"are needed for {n_clusters} clusters of {n_slots} parents."
        )

    gamma = _one_hot(kmeans_init(rows.e, n_clusters, seed), n_clusters)
    pi = np.full(gamma.shape, 1.0 / n_clusters)
    clusters = m_step(gamma, rows, specs, settings).clusters
    gamma, log_likelihood = e_step(clusters, pi, rows)
    trace = [log_likelihood]
    reseeded = False
    tags = np.argmax(gamma, axis=1)

    for iteration in range(settings.max_iterations):
        try:
            update = m_step(gamma, rows, specs, settings)
        except DegenerateClusterError:
            if reseeded:
                raise
            reseeded = True
            with np.errstate(divide="ignore"):
                row_ll = special.logsumexp(
                    np.log(pi) + _log_densities(clusters, rows), axis=1
                )
            logger.info(
                f"{specs[0].target.label()}: reseeding an empty cluster at "
                f"iteration {iteration}."
            )
            gamma = _reseed(gamma, row_ll)
            update = m_step(gamma, rows, specs, settings)
        clusters, pi, tags = update
        gamma, log_likelihood = e_step(clusters, pi, rows)
        trace.append(log_likelihood)
        logger.debug(
            f"{specs[0].target.label()} EM iteration {iteration + 1}: "
            f"log-likelihood {log_likelihood:.6f}"
        )
        if abs(trace[-1] - trace[-2]) < settings.tolerance * abs(trace[-1]):
            break

    model = CausalModel(
        category=specs[0].category,
        sensor_id=specs[0].sensor_id,
        max_lag=specs[0].max_lag,
        n_neighbors=max(spec.n_neighbors for spec in specs),
        clusters=clusters,
        cluster_weights=np.bincount(tags, minlength=n_clusters) / tags.size,
        ll_trace=trace,
        timestamps=rows.timestamps,
        tags=tags,
        pi=pi,
        gamma=gamma,
        pi_update=settings.pi_update,
        diff_mean=diff_mean,
        diff_std=diff_std,
    )
    return model, trace
