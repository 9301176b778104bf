"""
Principal component views of the environmental vectors behind the confounder clusters.
"""
from typing import NamedTuple

import numpy as np
from sklearn.decomposition import PCA


class Projection(NamedTuple):
    rows: np.ndarray
    explained_variance: np.ndarray


def pca_project(environment: np.ndarray, dims: int = 2) -> Projection:
    """
    Project environmental vectors onto their leading principal components, used to inspect
    how the confounder clusters separate.
    """
    environment = np.asarray(environment, dtype=float)
    if environment.ndim != 2:
        raise ValueError("The rows to project should be a 2D array.")
    if environment.shape[0] < dims or environment.shape[1] < dims:
        raise ValueError(
            f"{environment.shape[0]} rows of dimension {environment.shape[1]} "
            f"can not be projected on {dims} components."
        )
    pca = PCA(n_components=dims, svd_solver="full")
    rows = pca.fit_transform(environment)
    return Projection(rows, pca.explained_variance_)
