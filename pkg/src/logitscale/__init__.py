"""Logistic regression on chunked data: IRLS and L-BFGS fits, sandwich
covariance, Wald inference, reproducible data generation and validation
experiments."""

from .datagen import DataGenConfig, Pcg32, gen_dataset, stream_dataset
from .estimator import LogisticRegressionMLE
from .exceptions import (
    DegenerateResponse,
    DimensionMismatch,
    EmptyDataset,
    InvalidConfig,
    LeverageAtOne,
    LogitScaleError,
    MissingColumn,
    NotPositiveDefinite,
    OutOfRange,
    ParseError,
    TooManyFailures,
    ZeroSigma,
    ZeroStandardError,
)
from .inference import (
    CovKind,
    SummaryTable,
    build_summary,
    covariance_mle,
    covariance_sandwich,
    hat_diagonal,
    roc_curve,
)
from .io import DatasetSource, load_csv, render_summary, write_csv
from .model import Dataset, LogisticModel, RowChunk
from .solvers import FitResult, Method, SolverConfig, fit, fit_irls, fit_lbfgs

__version__ = "0.1.0"

__all__ = [
    "CovKind",
    "DataGenConfig",
    "Dataset",
    "DatasetSource",
    "DegenerateResponse",
    "DimensionMismatch",
    "EmptyDataset",
    "FitResult",
    "InvalidConfig",
    "LeverageAtOne",
    "LogisticModel",
    "LogisticRegressionMLE",
    "LogitScaleError",
    "Method",
    "MissingColumn",
    "NotPositiveDefinite",
    "OutOfRange",
    "ParseError",
    "Pcg32",
    "RowChunk",
    "SolverConfig",
    "SummaryTable",
    "TooManyFailures",
    "ZeroSigma",
    "ZeroStandardError",
    "build_summary",
    "covariance_mle",
    "covariance_sandwich",
    "fit",
    "fit_irls",
    "fit_lbfgs",
    "gen_dataset",
    "hat_diagonal",
    "load_csv",
    "render_summary",
    "roc_curve",
    "stream_dataset",
    "write_csv",
]
