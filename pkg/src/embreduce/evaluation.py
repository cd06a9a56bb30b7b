"""Stratified cross-validation of embedding reducers with a logistic probe.

Every statistic a fold uses (transform fit, one-hot vocabularies, median
imputation, probe standardisation) is computed from that fold's training
rows only.  Reports are deterministic given ``(dataset, config, seed)``,
independent of how many worker threads a sweep uses.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .classifier import LogisticModel, ProbeConfig, accuracy, logreg_fit, logreg_predict
from .data import LabeledDataset, format_float, read_rows
from .errors import EmbReduceError, InsufficientClassData, InsufficientData, InvalidParameter, NumericalFailure, ParseError
from .transforms import (
    METHODS,
    DegenerateVarianceWarning,
    FittedTransform,
    check_params,
    explained_variance_curve,
    fit_method,
    mean_norm_ratio,
    nonzero_rows,
    ppa_fit,
    ppa_transform,
)

__all__ = [
    "MODES",
    "MAX_FOLDS",
    "FoldAssignment",
    "FoldFit",
    "EvalReport",
    "stratified_kfold",
    "fit_fold",
    "fold_features",
    "cross_validate",
    "sweep",
    "diagnostics_report",
    "reports_to_csv",
    "reports_to_json",
    "score_predictions",
    "REPORT_PARAM_COLUMNS",
]

MODES = ("embeddings_only", "full_features")
MAX_FOLDS = 20
#: parameter columns of the report CSV, always present and in this order
REPORT_PARAM_COLUMNS = ("d", "delta", "nb")


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    k: int
    seed: int

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted (train, validation) row indices for ``fold``."""
        val = self.fold_of == fold
        return np.flatnonzero(~val), np.flatnonzero(val)


def stratified_kfold(y, k: int = 5, seed: int = 42) -> FoldAssignment:
    """Shuffle each class with ``seed`` and deal its rows round-robin over ``k`` folds.

    The dealing position carries over from one class to the next, so fold
    sizes differ by at most one overall as well as within every class.
    """
    y = np.asarray(y)
    k = int(k)
    if not 2 <= k <= MAX_FOLDS:
        raise InvalidParameter(f"number of folds must lie in [2, {MAX_FOLDS}], got {k}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if idx.size < k:
            raise InsufficientClassData(f"class {c} has {idx.size} samples, fewer than k={k} folds", label=int(c))
        idx = rng.permutation(idx)
        fold_of[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return FoldAssignment(fold_of=fold_of, k=k, seed=int(seed))


# ---------------------------------------------------------------- one fold


@dataclass(frozen=True)
class FoldFit:
    """Everything fitted on one training split."""

    transform: FittedTransform | None
    probe: LogisticModel
    categories: tuple[tuple[str, ...], ...] = ()
    medians: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode: str = "embeddings_only"


def _reduce(transform: FittedTransform | None, X: np.ndarray) -> np.ndarray:
    return X if transform is None else transform.transform(X)


def _tabular(dataset: LabeledDataset, idx: np.ndarray, categories, medians) -> np.ndarray:
    num = dataset.numeric[idx]
    if num.shape[1]:
        num = np.where(np.isnan(num), medians, num)
    blocks = [num]
    for j, cats in enumerate(categories):
        col = dataset.categorical[idx, j]
        # categories unseen in training map to the all-zero row
        blocks.append((col[:, None] == np.array(cats, dtype=object)[None, :]).astype(np.float64))
    return np.concatenate(blocks, axis=1) if blocks else np.zeros((idx.size, 0))


def fold_features(fit: FoldFit, dataset: LabeledDataset, idx: np.ndarray) -> np.ndarray:
    """Probe inputs for rows ``idx`` under a fitted fold."""
    reduced = _reduce(fit.transform, dataset.embedding[idx])
    if fit.mode == "embeddings_only":
        return reduced
    return np.concatenate([reduced, _tabular(dataset, idx, fit.categories, fit.medians)], axis=1)


def fit_fold(
    dataset: LabeledDataset,
    train_idx: np.ndarray,
    method: str,
    params: Mapping[str, Any],
    probe: ProbeConfig = ProbeConfig(),
    mode: str = "embeddings_only",
    seed: int = 42,
) -> FoldFit:
    """Fit transform, tabular preprocessing and probe on ``train_idx`` only."""
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    X = dataset.embedding[train_idx]
    y = dataset.labels[train_idx]
    transform = fit_method(method, X, y, params)
    categories: tuple = ()
    medians = np.zeros(0)
    if mode == "full_features":
        num = dataset.numeric[train_idx]
        medians = np.zeros(num.shape[1])
        for j in range(num.shape[1]):
            col = num[:, j][~np.isnan(num[:, j])]
            medians[j] = np.median(col) if col.size else 0.0
        categories = tuple(tuple(sorted(set(dataset.categorical[train_idx, j]))) for j in range(dataset.categorical.shape[1]))
    partial = FoldFit(transform=transform, probe=None, categories=categories, medians=medians, mode=mode)
    features = fold_features(partial, dataset, train_idx)
    model = logreg_fit(
        features, y, l2=probe.l2, max_iter=probe.max_iter, tol=probe.tol, seed=seed, n_classes=dataset.n_classes
    )
    return FoldFit(transform=transform, probe=model, categories=categories, medians=medians, mode=mode)


# ---------------------------------------------------------------- reports


def _json_float(x: float):
    return None if np.isnan(x) else x


def _from_json_float(x) -> float:
    return float("nan") if x is None else float(x)


@dataclass(frozen=True)
class EvalReport:
    method: str
    params: dict
    per_fold_accuracy: tuple[float, ...]
    mean_accuracy: float
    std_accuracy: float
    n_samples: int
    p: int
    K: int
    seed: int
    mode: str = "embeddings_only"
    error: str | None = None

    @property
    def k(self) -> int:
        return len(self.per_fold_accuracy)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": dict(self.params),
            "per_fold_accuracy": [_json_float(a) for a in self.per_fold_accuracy],
            "mean_accuracy": _json_float(self.mean_accuracy),
            "std_accuracy": _json_float(self.std_accuracy),
            "n_samples": self.n_samples,
            "p": self.p,
            "K": self.K,
            "seed": self.seed,
            "mode": self.mode,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvalReport":
        return cls(
            method=doc["method"],
            params=dict(doc["params"]),
            per_fold_accuracy=tuple(_from_json_float(v) for v in doc["per_fold_accuracy"]),
            mean_accuracy=_from_json_float(doc["mean_accuracy"]),
            std_accuracy=_from_json_float(doc["std_accuracy"]),
            n_samples=int(doc["n_samples"]),
            p=int(doc["p"]),
            K=int(doc["K"]),
            seed=int(doc["seed"]),
            mode=doc.get("mode", "embeddings_only"),
            error=doc.get("error"),
        )

    def summary(self) -> str:
        if self.error is not None:
            return f"{self.method}({self.params}) failed: {self.error}"
        shown = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return (
            f"{self.method}({shown}) [{self.mode}] accuracy "
            f"{self.mean_accuracy:.4f} +/- {self.std_accuracy:.4f} over {self.k} folds (seed {self.seed})"
        )


def _annotate(exc: Exception, fold: int) -> Exception:
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"fold {fold}: {exc.args[0]}",) + exc.args[1:]
    exc.fold = fold
    return exc


def cross_validate(
    dataset: LabeledDataset,
    method: str,
    params: Mapping[str, Any] | None = None,
    probe: ProbeConfig = ProbeConfig(),
    mode: str = "embeddings_only",
    seed: int = 42,
    k: int = 5,
) -> EvalReport:
    """Mean validation accuracy of ``method`` + probe over stratified folds.

    Errors raised inside a fold keep their type and get ``fold i:`` prefixed
    to the message (and a ``fold`` attribute).
    """
    if method not in METHODS:
        raise InvalidParameter(f"unknown method {method!r}; expected one of {METHODS}")
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    params = check_params(method, params or {}, dataset.p, dataset.n_classes)
    folds = stratified_kfold(dataset.labels, k, seed)
    scores = []
    for fold in range(folds.k):
        train, val = folds.split(fold)
        try:
            fit = fit_fold(dataset, train, method, params, probe, mode, seed)
            pred = logreg_predict(fit.probe, fold_features(fit, dataset, val))
        except EmbReduceError as exc:
            raise _annotate(exc, fold)
        scores.append(accuracy(dataset.labels[val], pred))
    arr = np.array(scores)
    return EvalReport(
        method=method,
        params=params,
        per_fold_accuracy=tuple(float(s) for s in scores),
        mean_accuracy=float(np.mean(arr)),
        std_accuracy=float(np.std(arr)),
        n_samples=dataset.n,
        p=dataset.p,
        K=dataset.n_classes,
        seed=int(seed),
        mode=mode,
    )


def _min_training_rows(dataset: LabeledDataset, k: int, seed: int) -> int:
    folds = stratified_kfold(dataset.labels, k, seed)
    usable = nonzero_rows(dataset.embedding)
    return min(int(np.sum(usable & (folds.fold_of != f))) for f in range(folds.k))


def sweep(
    dataset: LabeledDataset,
    method: str,
    grid: Sequence[Mapping[str, Any]],
    probe: ProbeConfig = ProbeConfig(),
    mode: str = "embeddings_only",
    seed: int = 42,
    parallelism: int = 1,
    k: int = 5,
    skip_failures: bool = False,
) -> list[EvalReport]:
    """One :class:`EvalReport` per grid point, in grid order.

    Every grid point is validated before anything runs.  All points share
    ``seed`` and hence the same folds, so the curve is comparable point to
    point.  With ``skip_failures`` a grid point whose fit fails numerically
    (e.g. unshrunk LDA on a singular scatter) yields a report with NaN
    accuracies and the message in ``error`` instead of aborting the sweep.
    """
    grid = list(grid)
    if not grid:
        return []
    if parallelism < 1:
        raise InvalidParameter(f"parallelism must be at least 1, got {parallelism}")
    n_train = _min_training_rows(dataset, k, seed)
    checked = []
    for i, point in enumerate(grid):
        try:
            checked.append(check_params(method, point, dataset.p, dataset.n_classes, n_rows=n_train))
        except InvalidParameter as exc:
            raise InvalidParameter(f"grid point {i} ({dict(point)}): {exc}") from None

    def run(point):
        try:
            return cross_validate(dataset, method, point, probe, mode, seed, k)
        except NumericalFailure as exc:
            if not skip_failures:
                raise
            nan = float("nan")
            return EvalReport(
                method=method,
                params=point,
                per_fold_accuracy=(nan,) * k,
                mean_accuracy=nan,
                std_accuracy=nan,
                n_samples=dataset.n,
                p=dataset.p,
                K=dataset.n_classes,
                seed=int(seed),
                mode=mode,
                error=str(exc),
            )

    if parallelism == 1:
        return [run(point) for point in checked]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, checked))


# ---------------------------------------------------------------- serialisation


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    """CSV text, one row per report.

    Columns: ``method, d, delta, nb, fold_0 .. fold_{k-1}, mean_accuracy,
    std_accuracy, seed, mode, n_samples, p, K, error``.  Unused parameters
    and failed accuracies are left empty; floats carry 17 significant digits.
    """
    k = max((r.k for r in reports), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["method", *REPORT_PARAM_COLUMNS, *(f"fold_{i}" for i in range(k)), "mean_accuracy", "std_accuracy", "seed", "mode", "n_samples", "p", "K", "error"]
    )
    for r in reports:
        params = []
        for key in REPORT_PARAM_COLUMNS:
            value = r.params.get(key)
            params.append("" if value is None else format_float(value) if isinstance(value, float) else str(value))
        folds = [format_float(a) for a in r.per_fold_accuracy] + [""] * (k - r.k)
        writer.writerow(
            [r.method, *params, *folds, format_float(r.mean_accuracy), format_float(r.std_accuracy), r.seed, r.mode, r.n_samples, r.p, r.K, r.error or ""]
        )
    return buf.getvalue()


def reports_to_json(reports: Sequence[EvalReport] | EvalReport) -> str:
    if isinstance(reports, EvalReport):
        return json.dumps(reports.to_dict(), indent=2) + "\n"
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


# ---------------------------------------------------------------- diagnostics and external scores


def diagnostics_report(dataset: LabeledDataset, d_remove: int = 10) -> dict:
    """Mean-norm ratio and explained-variance curves before and after PPA.

    Zero embedding rows are excluded throughout.  ``evr_degenerate`` flags
    constant data, whose curves are all zeros.
    """
    X = dataset.embedding[nonzero_rows(dataset.embedding)]
    if X.shape[0] < 2:
        raise InsufficientData("need at least two non-zero embedding rows")
    R = mean_norm_ratio(X)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateVarianceWarning)
        before = explained_variance_curve(X)
        degenerate = any(issubclass(w.category, DegenerateVarianceWarning) for w in caught)
        d = min(int(d_remove), X.shape[0] - 1, X.shape[1] - 1)
        if degenerate:
            after = before.copy()
        else:
            after = explained_variance_curve(ppa_transform(ppa_fit(X, d), X), drop_zero_rows=False)
    return {
        "R": R,
        "evr_curve": before.tolist(),
        "evr_curve_after_ppa": after.tolist(),
        "d_removed": d,
        "evr_degenerate": degenerate,
        "n": dataset.n,
        "n_nonzero": int(X.shape[0]),
        "p": dataset.p,
        "K": dataset.n_classes,
        "class_counts": dataset.class_counts().tolist(),
    }


def score_predictions(dataset: LabeledDataset, path, column: str = "prediction") -> float:
    """Accuracy of an external prediction file against ``dataset`` labels.

    The file is a CSV with a ``column`` of label values (as written in the
    dataset, e.g. ``low``/``high``), one row per dataset row in the same
    order.  Meant for placing another model's predictions next to the
    probe's numbers.
    """
    header, rows = read_rows(path)
    if column not in header:
        raise ParseError(f"{path}: missing prediction column", column=column)
    if len(rows) != dataset.n:
        raise ParseError(f"{path}: has {len(rows)} rows, dataset has {dataset.n}")
    pos = header.index(column)
    index = {name: k for k, name in enumerate(dataset.label_names)}
    pred = np.array([index.get(row[pos], -1) for row in rows])
    return accuracy(dataset.labels, pred)
