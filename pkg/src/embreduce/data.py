"""Labelled tabular datasets with an embedding block: CSV I/O and a synthetic generator.

The generator mimics the structure reported for averaged word embeddings of
job descriptions: every row shares a large common mean vector, the
remaining variance decays geometrically over a handful of dominant
directions, and the class signal lives inside those directions.  Fifteen
ordinary tabular columns (two categorical, thirteen numeric, one with
missing values) accompany the embedding block.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import GenerationError, InvalidParameter, ParseError

__all__ = [
    "LabeledDataset",
    "CsvSchema",
    "GeneratorConfig",
    "load_csv",
    "write_csv",
    "generate",
    "format_float",
]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Rows of tabular features with a designated embedding block.

    ``labels`` index into ``label_names``; ``numeric`` uses NaN for missing
    cells and ``categorical`` holds strings.
    """

    embedding: np.ndarray
    labels: np.ndarray
    label_names: tuple[str, ...]
    numeric: np.ndarray = None
    numeric_names: tuple[str, ...] = ()
    categorical: np.ndarray = None
    categorical_names: tuple[str, ...] = ()
    embedding_prefix: str = "emb_"
    label_column: str = "label"

    def __post_init__(self):
        n = self.embedding.shape[0]
        if self.numeric is None:
            object.__setattr__(self, "numeric", np.zeros((n, 0)))
        if self.categorical is None:
            object.__setattr__(self, "categorical", np.empty((n, 0), dtype=object))
        if self.embedding.ndim != 2 or self.embedding.shape[1] < 1:
            raise InvalidParameter(f"embedding must be an n x p matrix with p >= 1, got {self.embedding.shape}")
        for name, arr in (("labels", self.labels), ("numeric", self.numeric), ("categorical", self.categorical)):
            if arr.shape[0] != n:
                raise InvalidParameter(f"{name} has {arr.shape[0]} rows, embedding has {n}")
        if self.numeric.shape[1] != len(self.numeric_names):
            raise InvalidParameter("numeric_names does not match numeric columns")
        if self.categorical.shape[1] != len(self.categorical_names):
            raise InvalidParameter("categorical_names does not match categorical columns")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.label_names)):
            raise InvalidParameter("labels must index into label_names")

    @property
    def n(self) -> int:
        return int(self.embedding.shape[0])

    @property
    def p(self) -> int:
        return int(self.embedding.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def embedding_columns(self) -> list[str]:
        return [f"{self.embedding_prefix}{j}" for j in range(self.p)]

    def equals(self, other: "LabeledDataset") -> bool:
        """Exact equality of every array (NaN equal to NaN) and of the metadata."""
        return (
            self.label_names == other.label_names
            and self.numeric_names == other.numeric_names
            and self.categorical_names == other.categorical_names
            and self.embedding_prefix == other.embedding_prefix
            and self.label_column == other.label_column
            and np.array_equal(self.embedding, other.embedding)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.numeric, other.numeric, equal_nan=True)
            and self.categorical.shape == other.categorical.shape
            and bool(np.all(self.categorical == other.categorical))
        )


@dataclass(frozen=True)
class CsvSchema:
    """How to interpret CSV columns.

    When both ``categorical_columns`` and ``numeric_columns`` are ``None``
    every non-embedding, non-label column is kept and typed by inspection
    (numeric if every non-empty cell parses as a float).  Otherwise only the
    listed columns are kept.
    """

    embedding_prefix: str = "emb_"
    label_column: str = "label"
    categorical_columns: Sequence[str] | None = None
    numeric_columns: Sequence[str] | None = None


def format_float(x: float) -> str:
    """17 significant digits, empty string for NaN."""
    if math.isnan(x):
        return ""
    return format(float(x), ".17g")


def _parse_float(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


def _label_order(values: set[str]) -> list[str]:
    try:
        return sorted(values, key=int)
    except ValueError:
        return sorted(values)


def embedding_column_indices(header: Sequence[str], prefix: str) -> list[int]:
    """Header positions of ``prefix<j>`` columns ordered by ``j``; requires ``j`` to run 0..p-1."""
    found: dict[int, int] = {}
    for pos, name in enumerate(header):
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            found[int(name[len(prefix):])] = pos
    if not found:
        raise ParseError(f"no embedding columns with prefix {prefix!r}")
    if sorted(found) != list(range(len(found))):
        missing = sorted(set(range(max(found) + 1)) - set(found))
        raise ParseError(f"embedding columns are not contiguous; missing {prefix}{missing[0]}", column=f"{prefix}{missing[0]}")
    return [found[j] for j in range(len(found))]


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of a CSV file; ragged rows raise :class:`ParseError`."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: file is empty") from None
            rows = []
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"{path}: expected {len(header)} fields, found {len(row)}", row=reader.line_num
                    )
                rows.append(row)
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    return header, rows


def parse_embedding(header: Sequence[str], rows: Sequence[Sequence[str]], prefix: str) -> np.ndarray:
    cols = embedding_column_indices(header, prefix)
    out = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows):
        for j, pos in enumerate(cols):
            value = _parse_float(row[pos])
            if value is None or not math.isfinite(value):
                raise ParseError(f"non-numeric embedding value {row[pos]!r}", row=i + 2, column=header[pos])
            out[i, j] = value
    return out


def load_csv(path, schema: CsvSchema | None = None) -> LabeledDataset:
    """Read a dataset written by :func:`write_csv` or any compatible export.

    Labels are mapped to ``0..K-1`` in sorted order of their distinct
    values (numeric order when every label is an integer).  Row numbers in
    errors are file line numbers, the header being line 1.
    """
    schema = schema or CsvSchema()
    header, rows = read_rows(path)
    if schema.label_column not in header:
        raise ParseError(f"{path}: missing label column", column=schema.label_column)
    embedding = parse_embedding(header, rows, schema.embedding_prefix)
    emb_positions = set(embedding_column_indices(header, schema.embedding_prefix))
    label_pos = header.index(schema.label_column)

    raw_labels = [row[label_pos] for row in rows]
    names = _label_order(set(raw_labels))
    index = {name: k for k, name in enumerate(names)}
    labels = np.array([index[v] for v in raw_labels], dtype=np.int64)

    def position(name: str) -> int:
        if name not in header:
            raise ParseError(f"{path}: column not found", column=name)
        return header.index(name)

    if schema.categorical_columns is None and schema.numeric_columns is None:
        numeric_cols, categorical_cols = [], []
        for pos, name in enumerate(header):
            if pos in emb_positions or pos == label_pos:
                continue
            if all(row[pos] == "" or _parse_float(row[pos]) is not None for row in rows):
                numeric_cols.append(name)
            else:
                categorical_cols.append(name)
    else:
        numeric_cols = list(schema.numeric_columns or ())
        categorical_cols = list(schema.categorical_columns or ())

    numeric = np.full((len(rows), len(numeric_cols)), np.nan)
    for j, name in enumerate(numeric_cols):
        pos = position(name)
        for i, row in enumerate(rows):
            if row[pos] == "":
                continue
            value = _parse_float(row[pos])
            if value is None:
                raise ParseError(f"non-numeric value {row[pos]!r}", row=i + 2, column=name)
            numeric[i, j] = value
    categorical = np.empty((len(rows), len(categorical_cols)), dtype=object)
    for j, name in enumerate(categorical_cols):
        pos = position(name)
        categorical[:, j] = [row[pos] for row in rows]

    return LabeledDataset(
        embedding=embedding,
        labels=labels,
        label_names=tuple(names),
        numeric=numeric,
        numeric_names=tuple(numeric_cols),
        categorical=categorical,
        categorical_names=tuple(categorical_cols),
        embedding_prefix=schema.embedding_prefix,
        label_column=schema.label_column,
    )


def write_csv(dataset: LabeledDataset, path) -> None:
    """Write numeric, categorical, embedding and label columns, in that order."""
    header = [*dataset.numeric_names, *dataset.categorical_names, *dataset.embedding_columns(), dataset.label_column]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for i in range(dataset.n):
                writer.writerow(
                    [
                        *(format_float(v) for v in dataset.numeric[i]),
                        *(str(v) for v in dataset.categorical[i]),
                        *(format_float(v) for v in dataset.embedding[i]),
                        dataset.label_names[dataset.labels[i]],
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------- generator


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs of the synthetic embedding generator.

    Non-zero embedding rows are ``c * m + sum_j a_j g_j u_j + shift(label) +
    noise_sigma * eps`` with ``a_j = spike_decay ** j`` over ``spike_dims``
    random orthonormal directions ``u_j``.  The class shift lives in the
    first ``signal_dims`` of those directions and is scaled by
    ``signal_strength``; ``c`` is solved for after sampling so the
    mean-norm ratio equals ``target_R``.
    """

    n: int = 2000
    p: int = 300
    K: int = 3
    target_R: float = 11 / 12
    spike_dims: int = 10
    spike_decay: float = 0.7
    signal_dims: int = 10
    signal_strength: float = 1.0
    noise_sigma: float = 0.02
    class_priors: tuple[float, ...] | None = None
    zero_row_fraction: float = 0.0
    seed: int = 42

    def __post_init__(self):
        if self.class_priors is not None:
            object.__setattr__(self, "class_priors", tuple(float(v) for v in self.class_priors))
        self.validate()

    def priors(self) -> np.ndarray:
        if self.class_priors is None:
            return np.full(self.K, 1.0 / self.K)
        return np.asarray(self.class_priors)

    def validate(self) -> None:
        if self.n < 1 or self.p < 1 or self.K < 2:
            raise InvalidParameter(f"need n >= 1, p >= 1, K >= 2 (got n={self.n}, p={self.p}, K={self.K})")
        if not 0 <= self.signal_dims <= self.spike_dims <= self.p:
            raise InvalidParameter("need signal_dims <= spike_dims <= p")
        if self.spike_dims >= self.p:
            raise InvalidParameter("spike_dims must leave room for the mean direction (spike_dims < p)")
        if not 0.0 <= self.target_R < 1.0:
            raise InvalidParameter(f"target_R must lie in [0, 1), got {self.target_R}")
        if not 0.0 < self.spike_decay < 1.0:
            raise InvalidParameter(f"spike_decay must lie in (0, 1), got {self.spike_decay}")
        if self.signal_strength < 0 or self.noise_sigma < 0:
            raise InvalidParameter("signal_strength and noise_sigma must be non-negative")
        if not 0.0 <= self.zero_row_fraction < 1.0:
            raise InvalidParameter(f"zero_row_fraction must lie in [0, 1), got {self.zero_row_fraction}")
        if self.class_priors is not None:
            pri = np.asarray(self.class_priors)
            if pri.shape != (self.K,) or np.any(pri < 0) or abs(pri.sum() - 1.0) > 1e-9:
                raise InvalidParameter(f"class_priors must be {self.K} non-negative values summing to 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ParseError(f"unknown generator config field(s): {', '.join(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: generator config must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["class_priors"] is not None:
            d["class_priors"] = list(d["class_priors"])
        return d


def _ratio(c: float, m: np.ndarray, Z: np.ndarray) -> float:
    V = Z + c * m
    return float(np.linalg.norm(V.mean(axis=0)) / np.linalg.norm(V, axis=1).mean())


def _solve_mean_scale(m: np.ndarray, Z: np.ndarray, target: float) -> float:
    lo_ratio = _ratio(0.0, m, Z)
    if target < lo_ratio:
        raise GenerationError(f"target_R={target:.4f} is below what the sampled spread allows", (lo_ratio, 1.0))
    if target == lo_ratio:
        return 0.0
    hi = max(1.0, float(np.linalg.norm(Z, axis=1).mean()))
    while _ratio(hi, m, Z) < target:
        hi *= 2.0
        if hi > 1e12:
            raise GenerationError(f"target_R={target:.4f} is not reachable", (lo_ratio, 1.0))
    return brentq(lambda c: _ratio(c, m, Z) - target, 0.0, hi, xtol=1e-14, rtol=1e-14, maxiter=500)


def _class_centroids(rng: np.random.Generator, K: int, dims: int) -> np.ndarray:
    C = rng.standard_normal((K, dims))
    C -= C.mean(axis=0)
    norms = np.linalg.norm(C, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return C / norms


def _tabular_columns(rng: np.random.Generator, labels: np.ndarray, K: int):
    n = labels.shape[0]
    centered = labels - (K - 1) / 2.0
    titles = np.array(["engineer", "senior_engineer", "data_scientist", "analyst", "manager", "technician"])
    states = np.array([f"state_{i:02d}" for i in range(10)])
    # job title leans toward the label; state is pure noise
    title_idx = np.where(rng.random(n) < 0.3, labels % len(titles), rng.integers(0, len(titles), n))
    categorical = np.empty((n, 2), dtype=object)
    categorical[:, 0] = titles[title_idx]
    categorical[:, 1] = states[rng.integers(0, len(states), n)]

    numeric = np.empty((n, 13))
    numeric[:, 0:3] = 0.3 * centered[:, None] + rng.standard_normal((n, 3))
    numeric[:, 3:10] = (rng.random((n, 7)) < 0.5).astype(float)
    numeric[:, 10:13] = rng.standard_normal((n, 3))
    numeric[rng.random(n) < 0.05, 10] = np.nan
    names = tuple(f"feature_{i + 1}" for i in range(13))
    return numeric, names, categorical, ("job_title", "job_state")


def generate(config: GeneratorConfig | None = None) -> LabeledDataset:
    """Sample a dataset; identical configs give bitwise identical output.

    Raises
    ------
    GenerationError
        If ``target_R`` is below the mean-norm ratio the sampled rows have
        without any common component.
    """
    cfg = config or GeneratorConfig()
    emb_seq, tab_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(emb_seq)
    n, p, K = cfg.n, cfg.p, cfg.K

    labels = rng.choice(K, size=n, p=cfg.priors())
    basis, _ = np.linalg.qr(rng.standard_normal((p, cfg.spike_dims + 1)))
    U = basis[:, : cfg.spike_dims]
    mean_dir = basis[:, cfg.spike_dims]
    amplitudes = cfg.spike_decay ** np.arange(cfg.spike_dims)

    coeffs = rng.standard_normal((n, cfg.spike_dims)) * amplitudes
    if cfg.signal_dims:
        centroids = _class_centroids(rng, K, cfg.signal_dims) * amplitudes[: cfg.signal_dims]
        coeffs[:, : cfg.signal_dims] += cfg.signal_strength * centroids[labels]
    Z = coeffs @ U.T + cfg.noise_sigma * rng.standard_normal((n, p))

    n_zero = int(round(cfg.zero_row_fraction * n))
    zero_rows = np.sort(rng.choice(n, size=n_zero, replace=False)) if n_zero else np.zeros(0, dtype=int)
    keep = np.ones(n, dtype=bool)
    keep[zero_rows] = False
    if not keep.any():
        raise GenerationError("zero_row_fraction leaves no non-zero rows")

    scale = _solve_mean_scale(mean_dir, Z[keep], cfg.target_R)
    embedding = Z + scale * mean_dir
    embedding[~keep] = 0.0

    numeric, numeric_names, categorical, categorical_names = _tabular_columns(np.random.default_rng(tab_seq), labels, K)
    return LabeledDataset(
        embedding=embedding,
        labels=labels.astype(np.int64),
        label_names=tuple(str(k) for k in range(K)),
        numeric=numeric,
        numeric_names=numeric_names,
        categorical=categorical,
        categorical_names=categorical_names,
    )
