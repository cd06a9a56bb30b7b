"""Multinomial logistic-regression probe.

Features are standardised on the training data, then the mean
cross-entropy plus ``(l2 / 2) * ||W||_F^2`` is minimised from a zero start by
limited-memory BFGS with an Armijo backtracking line search.  Only gradient
evaluations are used, and every accepted step lowers the loss, so the
recorded loss history is non-increasing.  The bias is not penalised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .covariance import as_data_matrix, as_labels
from .errors import InsufficientClassData, InvalidParameter, NumericalFailure, ParseError, ShapeError

__all__ = [
    "ProbeConfig",
    "LogisticModel",
    "logistic_loss_grad",
    "logreg_fit",
    "logreg_predict",
    "logreg_predict_proba",
    "accuracy",
    "logistic_to_dict",
    "logistic_from_dict",
]

_HISTORY = 10
_ARMIJO_C = 1e-4
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class ProbeConfig:
    l2: float = 1.0
    max_iter: int = 500
    tol: float = 1e-6


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # d x K, acting on standardised features
    bias: np.ndarray
    feature_means: np.ndarray
    feature_scales: np.ndarray
    l2: float = 1.0
    converged: bool = False
    n_iter: int = 0
    loss_history: tuple = field(default=(), repr=False)

    @property
    def n_classes(self) -> int:
        return int(self.bias.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.feature_means.shape[0])


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def logistic_loss_grad(W: np.ndarray, b: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float):
    """Penalised mean cross-entropy and its gradient with respect to ``(W, b)``."""
    n = Z.shape[0]
    logits = Z @ W + b
    shift = logits.max(axis=1, keepdims=True)
    expz = np.exp(logits - shift)
    sums = expz.sum(axis=1, keepdims=True)
    lse = np.log(sums)[:, 0] + shift[:, 0]
    rows = np.arange(n)
    loss = float(np.mean(lse - logits[rows, y]) + 0.5 * l2 * np.sum(W * W))
    G = expz / sums
    G[rows, y] -= 1.0
    G /= n
    return loss, Z.T @ G + l2 * W, G.sum(axis=0)


def _standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[~(scales > 0)] = 1.0
    return means, scales


def logreg_fit(
    X,
    y,
    l2: float = 1.0,
    max_iter: int = 500,
    tol: float = 1e-6,
    seed: int = 0,
    n_classes: int | None = None,
) -> LogisticModel:
    """Fit the probe.

    The optimiser is deterministic and starts at zero, so ``seed`` has no
    effect on the result; it is accepted so callers can thread one seed
    through every stage of a run.

    Raises
    ------
    InsufficientClassData
        If some class in ``0..K-1`` has no sample, or ``N < K``.
    NumericalFailure
        If the loss becomes non-finite.
    """
    del seed
    X = as_data_matrix(X)
    n, d = X.shape
    y = as_labels(y, n)
    if l2 < 0:
        raise InvalidParameter(f"l2 must be non-negative, got {l2}")
    K = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if n < K:
        raise InsufficientClassData(f"need at least K={K} samples, got {n}")
    counts = np.bincount(y, minlength=K)
    if counts.shape[0] > K:
        raise InvalidParameter(f"labels exceed n_classes={K}")
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise InsufficientClassData(f"class {missing[0]} has no samples", label=int(missing[0]))

    means, scales = _standardize_stats(X)
    Z = (X - means) / scales

    nw = d * K

    def evaluate(theta):
        loss, gW, gb = logistic_loss_grad(theta[:nw].reshape(d, K), theta[nw:], Z, y, l2)
        if not np.isfinite(loss):
            raise NumericalFailure("logistic loss became non-finite")
        return loss, np.concatenate([gW.ravel(), gb])

    theta = np.zeros(nw + K)
    loss, grad = evaluate(theta)
    history = [loss]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(grad)) <= tol:
            converged = True
            it -= 1
            break
        direction = _two_loop(grad, s_hist, y_hist)
        slope = float(grad @ direction)
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            direction = -grad
            slope = -float(grad @ grad)
        step = 1.0 if s_hist else min(1.0, 1.0 / np.sum(np.abs(grad)))
        for _ in range(_MAX_HALVINGS):
            candidate = theta + step * direction
            new_loss, new_grad = evaluate(candidate)
            if new_loss <= loss + _ARMIJO_C * step * slope:
                break
            step *= 0.5
        else:
            # no acceptable step: the loss is flat to machine precision
            converged = np.max(np.abs(grad)) <= tol
            break
        s = candidate - theta
        yv = new_grad - grad
        if float(s @ yv) > 1e-12:
            s_hist.append(s)
            y_hist.append(yv)
            if len(s_hist) > _HISTORY:
                s_hist.pop(0)
                y_hist.pop(0)
        theta, loss, grad = candidate, new_loss, new_grad
        history.append(loss)
    else:
        converged = np.max(np.abs(grad)) <= tol

    return LogisticModel(
        weights=theta[:nw].reshape(d, K).copy(),
        bias=theta[nw:].copy(),
        feature_means=means,
        feature_scales=scales,
        l2=float(l2),
        converged=bool(converged),
        n_iter=it,
        loss_history=tuple(history),
    )


def _two_loop(grad: np.ndarray, s_hist: list, y_hist: list) -> np.ndarray:
    q = grad.copy()
    alphas = []
    rhos = [1.0 / float(yv @ s) for s, yv in zip(s_hist, y_hist)]
    for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    if s_hist:
        q *= float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
    for s, yv, rho, a in zip(s_hist, y_hist, rhos, reversed(alphas)):
        bcoef = rho * float(yv @ q)
        q += (a - bcoef) * s
    return -q


def logreg_predict_proba(model: LogisticModel, X) -> np.ndarray:
    X = as_data_matrix(X)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got {X.shape[1]}")
    Z = (X - model.feature_means) / model.feature_scales
    return _softmax(Z @ model.weights + model.bias)


def logreg_predict(model: LogisticModel, X) -> np.ndarray:
    """Most probable class per row; ties go to the lowest class index."""
    return np.argmax(logreg_predict_proba(model, X), axis=1)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError(f"label vectors differ in shape: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ShapeError("accuracy of an empty label vector is undefined")
    return float(np.mean(y_true == y_pred))


def logistic_to_dict(model: LogisticModel) -> dict:
    return {
        "format": "embreduce.logistic",
        "version": 1,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "feature_means": model.feature_means.tolist(),
        "feature_scales": model.feature_scales.tolist(),
        "l2": model.l2,
        "converged": model.converged,
        "n_iter": model.n_iter,
    }


def logistic_from_dict(doc) -> LogisticModel:
    if doc.get("format") != "embreduce.logistic" or doc.get("version") != 1:
        raise ParseError("not an embreduce.logistic v1 document")
    try:
        means = np.array(doc["feature_means"], dtype=np.float64)
        bias = np.array(doc["bias"], dtype=np.float64)
        return LogisticModel(
            weights=np.array(doc["weights"], dtype=np.float64).reshape(means.shape[0], bias.shape[0]),
            bias=bias,
            feature_means=means,
            feature_scales=np.array(doc["feature_scales"], dtype=np.float64),
            l2=float(doc["l2"]),
            converged=bool(doc["converged"]),
            n_iter=int(doc["n_iter"]),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed logistic document: {exc}") from None


def save_logistic(model: LogisticModel, path) -> None:
    Path(path).write_text(json.dumps(logistic_to_dict(model)) + "\n", encoding="utf-8")
