"""Linear dimensionality reduction for word-embedding blocks in tabular data.

PPA, PCA, shrinkage LDA and Partitioned-LDA behind one fit/transform
interface, embedding diagnostics, a synthetic generator and a stratified
cross-validation harness with a logistic-regression probe.
"""

from .classifier import LogisticModel, ProbeConfig, accuracy, logreg_fit, logreg_predict, logreg_predict_proba
from .covariance import CovarianceEstimate, ScatterPair, sample_covariance, scatter_matrices, shrink, shrinkage_target
from .data import CsvSchema, GeneratorConfig, LabeledDataset, generate, load_csv, write_csv
from .errors import (
    EmbReduceError,
    EmptySet,
    GenerationError,
    InsufficientClassData,
    InsufficientData,
    InvalidInput,
    InvalidParameter,
    NotPositiveDefinite,
    NumericalFailure,
    ParseError,
    ShapeError,
)
from .evaluation import EvalReport, cross_validate, diagnostics_report, stratified_kfold, sweep
from .linalg import EigenDecomposition, cholesky, generalized_sym_eig, sym_eig
from .transforms import (
    LdaModel,
    PartitionedLdaModel,
    PcaModel,
    PpaModel,
    explained_variance_curve,
    lda_fit,
    lda_transform,
    load_model,
    mean_norm_ratio,
    pca_fit,
    pca_transform,
    plda_fit,
    plda_transform,
    ppa_fit,
    ppa_transform,
    save_model,
    valid_block_counts,
)

__version__ = "0.1.0"

__all__ = [
    "LogisticModel",
    "ProbeConfig",
    "accuracy",
    "logreg_fit",
    "logreg_predict",
    "logreg_predict_proba",
    "CovarianceEstimate",
    "ScatterPair",
    "sample_covariance",
    "scatter_matrices",
    "shrink",
    "shrinkage_target",
    "CsvSchema",
    "GeneratorConfig",
    "LabeledDataset",
    "generate",
    "load_csv",
    "write_csv",
    "EmbReduceError",
    "EmptySet",
    "GenerationError",
    "InsufficientClassData",
    "InsufficientData",
    "InvalidInput",
    "InvalidParameter",
    "NotPositiveDefinite",
    "NumericalFailure",
    "ParseError",
    "ShapeError",
    "EvalReport",
    "cross_validate",
    "diagnostics_report",
    "stratified_kfold",
    "sweep",
    "EigenDecomposition",
    "cholesky",
    "generalized_sym_eig",
    "sym_eig",
    "LdaModel",
    "PartitionedLdaModel",
    "PcaModel",
    "PpaModel",
    "explained_variance_curve",
    "lda_fit",
    "lda_transform",
    "load_model",
    "mean_norm_ratio",
    "pca_fit",
    "pca_transform",
    "plda_fit",
    "plda_transform",
    "ppa_fit",
    "ppa_transform",
    "save_model",
    "valid_block_counts",
]
