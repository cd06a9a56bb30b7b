"""Linear reducers for embedding blocks, plus embedding diagnostics.

Four transforms share a fit/transform shape:

* PPA removes the mean and the top ``d`` principal directions (output keeps
  all ``p`` coordinates).
* PCA projects onto the top ``d`` principal directions.
* LDA projects onto the ``K - 1`` Fisher discriminants, optionally with a
  shrunk within-class scatter.
* Partitioned-LDA splits the ``p`` coordinates into ``nb`` contiguous blocks
  and fits an independent LDA per block.

All-zero embedding rows carry no information about the embedding geometry,
so every ``*_fit`` drops them before computing statistics (controlled by
``drop_zero_rows``).  ``*_transform`` maps every row, zero or not.

Fitted models are frozen dataclasses and serialise to a versioned JSON
document through :func:`model_to_dict` / :func:`save_model`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

from .covariance import ScatterPair, as_data_matrix, as_labels, sample_covariance, scatter_matrices, shrink
from .errors import (
    EmptySet,
    InsufficientClassData,
    InsufficientData,
    InvalidParameter,
    NotPositiveDefinite,
    ParseError,
    ShapeError,
)
from .linalg import generalized_sym_eig, sym_eig

__all__ = [
    "PpaModel",
    "PcaModel",
    "LdaModel",
    "PartitionedLdaModel",
    "DegenerateVarianceWarning",
    "METHODS",
    "nonzero_rows",
    "ppa_fit",
    "ppa_transform",
    "pca_fit",
    "pca_transform",
    "lda_fit",
    "lda_transform",
    "lda_objective",
    "plda_fit",
    "plda_transform",
    "valid_block_counts",
    "check_params",
    "fit_method",
    "mean_norm_ratio",
    "explained_variance_curve",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

FORMAT_NAME = "embreduce.model"
FORMAT_VERSION = 1

#: methods accepted by :func:`fit_method` and the evaluation harness
METHODS = ("raw", "ppa", "pca", "lda", "plda")


class DegenerateVarianceWarning(UserWarning):
    """Emitted when an explained-variance curve is requested for constant data."""


def nonzero_rows(X: np.ndarray) -> np.ndarray:
    """Boolean mask of rows with at least one non-zero entry."""
    return np.any(X != 0.0, axis=1)


def _fit_rows(X: np.ndarray, drop_zero_rows: bool) -> np.ndarray:
    if not drop_zero_rows:
        return X
    mask = nonzero_rows(X)
    return X if mask.all() else X[mask]


def _check_columns(X, expected: int) -> np.ndarray:
    X = as_data_matrix(X)
    if X.shape[1] != expected:
        raise ShapeError(f"expected {expected} columns, got {X.shape[1]}")
    return X


# ---------------------------------------------------------------- PPA / PCA


@dataclass(frozen=True)
class PpaModel:
    """Mean and the principal directions removed by PPA (rows of ``removed_directions``)."""

    mean: np.ndarray
    removed_directions: np.ndarray

    method = "ppa"

    @property
    def d_removed(self) -> int:
        return int(self.removed_directions.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def output_dim(self) -> int:
        return self.input_dim

    def transform(self, X) -> np.ndarray:
        return ppa_transform(self, X)


@dataclass(frozen=True)
class PcaModel:
    """Mean, top principal directions (rows) and their variances."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    method = "pca"

    @property
    def d_kept(self) -> int:
        return int(self.components.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def output_dim(self) -> int:
        return self.d_kept

    def transform(self, X) -> np.ndarray:
        return pca_transform(self, X)


def ppa_fit(X, d_remove: int, drop_zero_rows: bool = True) -> PpaModel:
    """Fit the mean and top ``d_remove`` principal directions of ``X``."""
    X = _fit_rows(as_data_matrix(X), drop_zero_rows)
    n, p = X.shape
    d_remove = int(d_remove)
    if not 0 <= d_remove < min(n, p):
        raise InvalidParameter(f"d_remove must satisfy 0 <= d < min(N, p) = {min(n, p)}, got {d_remove}")
    cov = sample_covariance(X)
    if d_remove == 0:
        directions = np.zeros((0, p))
    else:
        directions = sym_eig(cov.matrix).eigenvectors[:, :d_remove].T.copy()
    return PpaModel(mean=cov.mean, removed_directions=directions)


def ppa_transform(model: PpaModel, X) -> np.ndarray:
    """Centre ``X`` and project the removed directions away."""
    X = _check_columns(X, model.input_dim)
    R = X - model.mean
    U = model.removed_directions
    if U.shape[0] == 0:
        return R
    return R - (R @ U.T) @ U


def pca_fit(X, d_keep: int, drop_zero_rows: bool = True) -> PcaModel:
    """Fit the mean and the top ``d_keep`` principal directions of ``X``."""
    X = _fit_rows(as_data_matrix(X), drop_zero_rows)
    n, p = X.shape
    d_keep = int(d_keep)
    if not 1 <= d_keep <= min(n - 1, p):
        raise InvalidParameter(f"d_keep must satisfy 1 <= d <= min(N-1, p) = {min(n - 1, p)}, got {d_keep}")
    cov = sample_covariance(X)
    values, vectors = sym_eig(cov.matrix)
    return PcaModel(
        mean=cov.mean,
        components=vectors[:, :d_keep].T.copy(),
        explained_variance=values[:d_keep].copy(),
    )


def pca_transform(model: PcaModel, X) -> np.ndarray:
    """Coordinates of the centred rows along the kept directions."""
    X = _check_columns(X, model.input_dim)
    return (X - model.mean) @ model.components.T


# ---------------------------------------------------------------- LDA


@dataclass(frozen=True)
class LdaModel:
    """Fisher discriminant weights (``p x (K-1)``) and the scatter they came from."""

    weights: np.ndarray
    shrinkage: float
    scatter: ScatterPair

    method = "lda"

    @property
    def class_count(self) -> int:
        return self.scatter.n_classes

    @property
    def input_dim(self) -> int:
        return int(self.weights.shape[0])

    @property
    def output_dim(self) -> int:
        return int(self.weights.shape[1])

    def transform(self, X) -> np.ndarray:
        return lda_transform(self, X)


def _labels_and_classes(y, n: int) -> tuple[np.ndarray, int]:
    y = as_labels(y, n)
    if y.size == 0:
        raise InsufficientData("no samples")
    return y, int(y.max()) + 1


def _lda_fit_rows(X: np.ndarray, y: np.ndarray, K: int, delta: float) -> LdaModel:
    p = X.shape[1]
    if p <= K:
        raise InvalidParameter(f"LDA needs more dimensions than classes (p={p}, K={K})")
    counts = np.bincount(y, minlength=K)
    for k in range(K):
        if counts[k] < 2:
            raise InsufficientClassData(f"class {k} has {counts[k]} non-zero samples, need at least 2", label=k)
    scatter = scatter_matrices(X, y)
    within = shrink(scatter.within, delta)
    try:
        _, vectors = generalized_sym_eig(scatter.between, within)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            f"within-class scatter is singular at shrinkage {delta:g} "
            f"(pivot {exc.pivot}); increase shrinkage",
            pivot=exc.pivot,
        ) from None
    return LdaModel(weights=np.ascontiguousarray(vectors[:, : K - 1]), shrinkage=float(delta), scatter=scatter)


def lda_fit(X, y, delta: float = 0.0, drop_zero_rows: bool = True) -> LdaModel:
    """Fit ``K - 1`` discriminant directions with shrinkage ``delta`` on the within-class scatter.

    Raises
    ------
    NotPositiveDefinite
        If the (shrunk) within-class scatter is singular, typically when
        ``delta = 0`` and there are fewer samples than dimensions.
    InsufficientClassData
        If a class has fewer than two usable rows.
    """
    X = as_data_matrix(X)
    y, K = _labels_and_classes(y, X.shape[0])
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameter(f"shrinkage delta must lie in [0, 1], got {delta}")
    if drop_zero_rows:
        mask = nonzero_rows(X)
        if not mask.all():
            X, y = X[mask], y[mask]
    return _lda_fit_rows(X, y, K, delta)


def lda_transform(model: LdaModel, X) -> np.ndarray:
    X = _check_columns(X, model.input_dim)
    return X @ model.weights


def lda_objective(W, between, within) -> float:
    """Determinant ratio ``det(W^T B W) / det(W^T S W)`` maximised by LDA."""
    W = np.asarray(W, dtype=np.float64)
    num = np.linalg.det(W.T @ between @ W)
    den = np.linalg.det(W.T @ within @ W)
    return float(num / den)


# ---------------------------------------------------------------- Partitioned-LDA


@dataclass(frozen=True)
class PartitionedLdaModel:
    """One :class:`LdaModel` per contiguous coordinate block."""

    blocks: tuple[LdaModel, ...]
    block_size: int

    method = "plda"

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def input_dim(self) -> int:
        return self.n_blocks * self.block_size

    @property
    def output_dim(self) -> int:
        return sum(b.output_dim for b in self.blocks)

    @property
    def shrinkage(self) -> float:
        return self.blocks[0].shrinkage

    def transform(self, X) -> np.ndarray:
        return plda_transform(self, X)


def valid_block_counts(p: int, n_classes: int) -> list[int]:
    """Block counts that split ``p`` evenly into blocks larger than ``n_classes``."""
    return [nb for nb in range(1, p + 1) if p % nb == 0 and p // nb > n_classes]


def _check_blocks(p: int, K: int, n_blocks: int) -> int:
    if n_blocks < 1 or p % n_blocks != 0 or p // n_blocks <= K:
        raise InvalidParameter(
            f"n_blocks={n_blocks} is invalid for p={p}, K={K}: need p % n_blocks == 0 and "
            f"p / n_blocks > K; valid values are {valid_block_counts(p, K)}"
        )
    return p // n_blocks


def plda_fit(X, y, n_blocks: int, delta: float = 0.0, drop_zero_rows: bool = True) -> PartitionedLdaModel:
    """Fit an independent LDA on each of ``n_blocks`` contiguous column blocks."""
    X = as_data_matrix(X)
    y, K = _labels_and_classes(y, X.shape[0])
    s = _check_blocks(X.shape[1], K, int(n_blocks))
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise InvalidParameter(f"shrinkage delta must lie in [0, 1], got {delta}")
    if drop_zero_rows:
        mask = nonzero_rows(X)
        if not mask.all():
            X, y = X[mask], y[mask]
    blocks = []
    for i in range(int(n_blocks)):
        Xb = X if n_blocks == 1 else np.ascontiguousarray(X[:, i * s : (i + 1) * s])
        try:
            blocks.append(_lda_fit_rows(Xb, y, K, delta))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"block {i}: {exc}", pivot=exc.pivot) from None
    return PartitionedLdaModel(blocks=tuple(blocks), block_size=s)


def plda_transform(model: PartitionedLdaModel, X) -> np.ndarray:
    X = _check_columns(X, model.input_dim)
    s = model.block_size
    if model.n_blocks == 1:
        return lda_transform(model.blocks[0], X)
    parts = [lda_transform(b, X[:, i * s : (i + 1) * s]) for i, b in enumerate(model.blocks)]
    return np.concatenate(parts, axis=1)


# ---------------------------------------------------------------- dispatch

FittedTransform = Union[PpaModel, PcaModel, LdaModel, PartitionedLdaModel]

PARAM_KEYS = {"raw": (), "ppa": ("d",), "pca": ("d",), "lda": ("delta",), "plda": ("nb", "delta")}


def check_params(method: str, params: Mapping[str, Any], p: int, n_classes: int, n_rows: int | None = None) -> dict:
    """Validate ``params`` for ``method`` without fitting anything.

    Returns a normalised copy (``d``/``nb`` as int, ``delta`` as float).
    Missing keys are an error; ``n_rows`` bounds ``d`` when given.
    """
    if method not in PARAM_KEYS:
        raise InvalidParameter(f"unknown method {method!r}; expected one of {METHODS}")
    out: dict[str, Any] = {}
    for key in PARAM_KEYS[method]:
        if key not in params or params[key] is None:
            raise InvalidParameter(f"method {method!r} requires parameter {key!r}")
        out[key] = float(params[key]) if key == "delta" else int(params[key])
    if method == "ppa":
        limit = p if n_rows is None else min(p, n_rows)
        if not 0 <= out["d"] < limit:
            raise InvalidParameter(f"ppa needs 0 <= d < {limit}, got {out['d']}")
    if method == "pca":
        limit = p if n_rows is None else min(p, n_rows - 1)
        if not 1 <= out["d"] <= limit:
            raise InvalidParameter(f"pca needs 1 <= d <= {limit}, got {out['d']}")
    if "delta" in out and not 0.0 <= out["delta"] <= 1.0:
        raise InvalidParameter(f"shrinkage delta must lie in [0, 1], got {out['delta']}")
    if method == "lda" and p <= n_classes:
        raise InvalidParameter(f"LDA needs more dimensions than classes (p={p}, K={n_classes})")
    if method == "plda":
        _check_blocks(p, n_classes, out["nb"])
    return out


def fit_method(method: str, X, y, params: Mapping[str, Any]) -> FittedTransform | None:
    """Fit the transform named by ``method``; ``"raw"`` returns ``None``."""
    if method == "raw":
        return None
    if method == "ppa":
        return ppa_fit(X, params["d"])
    if method == "pca":
        return pca_fit(X, params["d"])
    if method == "lda":
        return lda_fit(X, y, params["delta"])
    if method == "plda":
        return plda_fit(X, y, params["nb"], params["delta"])
    raise InvalidParameter(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------- diagnostics


def mean_norm_ratio(X, drop_zero_rows: bool = True) -> float:
    """Norm of the mean row divided by the mean row norm, in ``[0, 1]``."""
    X = as_data_matrix(X)
    if drop_zero_rows:
        X = X[nonzero_rows(X)]
    if X.shape[0] == 0:
        raise EmptySet("no non-zero rows to compute the mean-norm ratio")
    # averages taken relative to the first row: exact when all rows agree
    norms = np.linalg.norm(X, axis=1)
    avg_norm = norms[0] + np.mean(norms - norms[0])
    if avg_norm == 0.0:
        return 0.0
    ratio = np.linalg.norm(X[0] + np.mean(X - X[0], axis=0)) / avg_norm
    return float(min(ratio, 1.0))


def explained_variance_curve(X, drop_zero_rows: bool = True) -> np.ndarray:
    """Eigenvalue shares ``lambda_i / sum(lambda)`` of the sample covariance.

    The curve has ``min(N - 1, p)`` entries.  Constant data has no variance
    to share; the all-zero curve is returned and a
    :class:`DegenerateVarianceWarning` is emitted.
    """
    X = as_data_matrix(X)
    if drop_zero_rows:
        X = X[nonzero_rows(X)]
    n, p = X.shape
    cov = sample_covariance(X)
    length = min(n - 1, p)
    total = float(np.trace(cov.matrix))
    scale = float(np.mean(np.sum(X * X, axis=1)))
    if total <= 1e-20 * scale or total == 0.0:
        warnings.warn("data has zero variance; explained-variance curve is all zeros", DegenerateVarianceWarning)
        return np.zeros(length)
    values = np.clip(sym_eig(cov.matrix).eigenvalues[:length], 0.0, None)
    return values / values.sum()


# ---------------------------------------------------------------- serialisation


def _matrix(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _lda_payload(m: LdaModel) -> dict:
    sc = m.scatter
    return {
        "weights": _matrix(m.weights),
        "within": _matrix(sc.within),
        "between": _matrix(sc.between),
        "class_means": _matrix(sc.class_means),
        "class_counts": sc.class_counts.astype(int).tolist(),
        "overall_mean": _matrix(sc.overall_mean),
    }


def _lda_from_payload(d: Mapping, delta: float) -> LdaModel:
    p = len(d["overall_mean"])
    K = len(d["class_counts"])
    scatter = ScatterPair(
        within=np.array(d["within"], dtype=np.float64).reshape(p, p),
        between=np.array(d["between"], dtype=np.float64).reshape(p, p),
        class_means=np.array(d["class_means"], dtype=np.float64).reshape(K, p),
        class_counts=np.array(d["class_counts"], dtype=np.int64),
        overall_mean=np.array(d["overall_mean"], dtype=np.float64),
    )
    weights = np.array(d["weights"], dtype=np.float64).reshape(p, K - 1)
    return LdaModel(weights=weights, shrinkage=float(delta), scatter=scatter)


def model_to_dict(model: FittedTransform) -> dict:
    """JSON-ready description of a fitted transform.

    Floats are stored as Python floats, whose ``repr`` round-trips every
    double exactly.
    """
    doc: dict[str, Any] = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "method": model.method, "p": model.input_dim}
    if isinstance(model, PpaModel):
        doc["params"] = {"d": model.d_removed}
        doc["mean"] = _matrix(model.mean)
        doc["matrices"] = {"removed_directions": _matrix(model.removed_directions)}
    elif isinstance(model, PcaModel):
        doc["params"] = {"d": model.d_kept}
        doc["mean"] = _matrix(model.mean)
        doc["matrices"] = {
            "components": _matrix(model.components),
            "explained_variance": _matrix(model.explained_variance),
        }
    elif isinstance(model, LdaModel):
        doc["params"] = {"delta": model.shrinkage}
        doc["mean"] = _matrix(model.scatter.overall_mean)
        doc["matrices"] = _lda_payload(model)
    elif isinstance(model, PartitionedLdaModel):
        doc["params"] = {"nb": model.n_blocks, "delta": model.shrinkage}
        doc["mean"] = np.concatenate([b.scatter.overall_mean for b in model.blocks]).tolist()
        doc["matrices"] = {"blocks": [_lda_payload(b) for b in model.blocks]}
    else:
        raise TypeError(f"not a fitted transform: {type(model).__name__}")
    return doc


def model_from_dict(doc: Mapping) -> FittedTransform:
    """Inverse of :func:`model_to_dict`."""
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(f"not an {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported model version {doc.get('version')!r}")
    try:
        method = doc["method"]
        p = int(doc["p"])
        params = doc["params"]
        mats = doc["matrices"]
        if method == "ppa":
            U = np.array(mats["removed_directions"], dtype=np.float64).reshape(int(params["d"]), p)
            return PpaModel(mean=np.array(doc["mean"], dtype=np.float64), removed_directions=U)
        if method == "pca":
            C = np.array(mats["components"], dtype=np.float64).reshape(int(params["d"]), p)
            return PcaModel(
                mean=np.array(doc["mean"], dtype=np.float64),
                components=C,
                explained_variance=np.array(mats["explained_variance"], dtype=np.float64),
            )
        if method == "lda":
            return _lda_from_payload(mats, params["delta"])
        if method == "plda":
            blocks = tuple(_lda_from_payload(b, params["delta"]) for b in mats["blocks"])
            return PartitionedLdaModel(blocks=blocks, block_size=p // len(blocks))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model document: {exc}") from None
    raise ParseError(f"unknown method {method!r} in model document")


def save_model(model: FittedTransform, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)) + "\n", encoding="utf-8")


def load_model(path) -> FittedTransform:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    return model_from_dict(doc)
