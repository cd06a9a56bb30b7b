"""Covariance, shrinkage and class-scatter estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientClassData, InsufficientData, InvalidInput, InvalidParameter
from .linalg import as_sym_matrix

__all__ = [
    "CovarianceEstimate",
    "ScatterPair",
    "as_data_matrix",
    "as_labels",
    "sample_covariance",
    "shrinkage_target",
    "shrink",
    "scatter_matrices",
]


@dataclass(frozen=True)
class CovarianceEstimate:
    """A covariance matrix together with the statistics it came from.

    ``matrix`` uses the biased ``1/N`` normalisation.  ``shrinkage`` is the
    blend weight toward the scaled-identity target (0 for the raw estimate).
    """

    matrix: np.ndarray
    mean: np.ndarray
    n_samples: int
    shrinkage: float = 0.0


@dataclass(frozen=True)
class ScatterPair:
    """Within- and between-class scatter of a labelled sample.

    Both matrices are raw (unnormalised) sums of outer products, so
    ``within + between`` equals ``N`` times the biased sample covariance.
    """

    within: np.ndarray
    between: np.ndarray
    class_means: np.ndarray
    class_counts: np.ndarray
    overall_mean: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(self.class_counts.shape[0])


def as_data_matrix(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInput(f"{name} must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return X


def as_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n:
        raise InvalidInput(f"labels must be a vector of length {n}, got shape {y.shape}")
    if y.size and (not np.issubdtype(y.dtype, np.integer) or y.min() < 0):
        if np.issubdtype(y.dtype, np.floating) and np.all(y == np.round(y)) and y.min() >= 0:
            return y.astype(np.int64)
        raise InvalidInput("labels must be non-negative integers")
    return y.astype(np.int64)


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def sample_covariance(X) -> CovarianceEstimate:
    """Biased (``1/N``) sample covariance of the rows of ``X``."""
    X = as_data_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise InsufficientData(f"need at least 2 rows for a covariance, got {n}")
    mean = X.mean(axis=0)
    R = X - mean
    C = _symmetrize(R.T @ R) / n
    return CovarianceEstimate(matrix=C, mean=mean, n_samples=n)


def shrinkage_target(C) -> np.ndarray:
    """Scaled identity whose diagonal is the average variance of ``C``."""
    C = as_sym_matrix(C, "C")
    p = C.shape[0]
    return (np.trace(C) / p) * np.eye(p)


def shrink(C, delta: float) -> np.ndarray:
    """Blend ``C`` toward :func:`shrinkage_target` with weight ``delta``.

    ``delta = 0`` returns ``C`` unchanged and ``delta = 1`` returns the
    target exactly.
    """
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameter(f"shrinkage delta must lie in [0, 1], got {delta}")
    C = as_sym_matrix(C, "C")
    if delta == 0.0:
        return C.copy()
    F = shrinkage_target(C)
    if delta == 1.0:
        return F
    return delta * F + (1.0 - delta) * C


def scatter_matrices(X, y) -> ScatterPair:
    """Within-class and between-class scatter for labels ``0..K-1``.

    The between-class term weights each class by its size,
    ``sum_k |C_k| (mu_k - mu)(mu_k - mu)^T``.

    Raises
    ------
    InsufficientClassData
        If fewer than two classes are present or any class ``0..K-1`` has
        fewer than two samples.
    """
    X = as_data_matrix(X)
    y = as_labels(y, X.shape[0])
    if y.size == 0:
        raise InsufficientData("no samples")
    K = int(y.max()) + 1
    if K < 2:
        raise InsufficientClassData("need at least two classes", label=0)
    counts = np.bincount(y, minlength=K)
    for k in range(K):
        if counts[k] < 2:
            raise InsufficientClassData(f"class {k} has {counts[k]} samples, need at least 2", label=k)

    p = X.shape[1]
    overall = X.mean(axis=0)
    means = np.empty((K, p))
    within = np.zeros((p, p))
    for k in range(K):
        Xk = X[y == k]
        means[k] = Xk.mean(axis=0)
        Rk = Xk - means[k]
        within += Rk.T @ Rk
    D = means - overall
    between = (D.T * counts) @ D
    return ScatterPair(
        within=_symmetrize(within),
        between=_symmetrize(between),
        class_means=means,
        class_counts=counts,
        overall_mean=overall,
    )
