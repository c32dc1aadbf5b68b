"""scikit-learn compatible front end for the chunked logistic MLE."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InvalidConfig
from .inference import CovKind, SummaryTable, build_summary
from .model import DEFAULT_CHUNK_SIZE, Dataset, LogisticModel, RowChunk, predict_proba
from .solvers import FitResult, Method, SolverConfig, fit

__all__ = ["LogisticRegressionMLE"]


class LogisticRegressionMLE(ClassifierMixin, BaseEstimator):
    """Unpenalized binary logistic regression with Wald inference.

    Parameters
    ----------
    solver : {"lbfgs", "irls"}
        Optimizer. ``"irls"`` takes full Newton steps on the exact Hessian.
    tol : float
        Convergence threshold on the infinity norm of the gradient.
    max_iter : int or None
        Iteration cap; ``None`` uses the solver's default.
    lbfgs_memory : int
        Number of correction pairs kept by L-BFGS.
    fit_intercept : bool
        Whether to estimate an intercept.
    cov_type : {"sandwich", "mle"}
        Covariance used for standard errors in :meth:`summary`.
    confidence_level : float
        Coverage of the Wald intervals.
    chunk_size : int
        Rows per chunk when ``fit`` receives in-memory arrays.
    n_jobs : int or None
        Threads for the per-chunk map; ``None`` or 1 runs serially.

    Attributes
    ----------
    coef_ : ndarray of shape (1, n_features)
    intercept_ : ndarray of shape (1,)
    classes_ : ndarray of shape (2,)
    fit_result_ : FitResult
    summary_ : SummaryTable
    covariance_ : ndarray
        Covariance of all parameters, intercept first.
    """

    def __init__(
        self,
        solver="lbfgs",
        tol=1e-8,
        max_iter=None,
        lbfgs_memory=10,
        fit_intercept=True,
        cov_type="sandwich",
        confidence_level=0.95,
        chunk_size=DEFAULT_CHUNK_SIZE,
        n_jobs=None,
    ):
        self.solver = solver
        self.tol = tol
        self.max_iter = max_iter
        self.lbfgs_memory = lbfgs_memory
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type
        self.confidence_level = confidence_level
        self.chunk_size = chunk_size
        self.n_jobs = n_jobs

    def _config(self) -> SolverConfig:
        try:
            method = Method(self.solver)
        except ValueError:
            raise InvalidConfig(f"unknown solver {self.solver!r}") from None
        return SolverConfig(
            method=method,
            tol=self.tol,
            max_iter=self.max_iter,
            lbfgs_memory=self.lbfgs_memory,
            n_jobs=self.n_jobs,
        )

    def _validate_options(self):
        try:
            CovKind(self.cov_type)
        except ValueError:
            raise InvalidConfig(f"unknown cov_type {self.cov_type!r}") from None
        if not 0.0 < self.confidence_level < 1.0:
            raise InvalidConfig("confidence_level must lie in (0, 1)")

    def fit(self, X, y):
        """Fit on arrays; ``y`` must contain exactly two classes."""
        X, y = check_X_y(X, y, dtype=np.float64)
        classes, y01 = np.unique(y, return_inverse=True)
        if classes.size != 2:
            raise ValueError(f"exactly two classes are required, got {classes.size}")
        self.classes_ = classes
        data = Dataset.from_arrays(X, y01.astype(np.float64), chunk_size=self.chunk_size)
        return self._fit_data(data)

    def fit_dataset(self, data: Dataset):
        """Fit on an already chunked (possibly streamed) dataset with 0/1 responses."""
        self.classes_ = np.array([0, 1])
        return self._fit_data(data)

    def _fit_data(self, data: Dataset):
        self._validate_options()
        result = fit(data, self._config(), has_intercept=self.fit_intercept)
        self.fit_result_: FitResult = result
        self.n_features_in_ = data.n_features
        beta = result.beta_hat
        if self.fit_intercept:
            self.intercept_ = beta[:1].copy()
            self.coef_ = beta[1:].reshape(1, -1)
        else:
            self.intercept_ = np.zeros(1)
            self.coef_ = beta.reshape(1, -1)
        self.n_iter_ = np.array([result.iterations])
        self._data = data
        self.summary_ = None
        self.covariance_ = None
        if result.failure is None:
            self.summary_ = build_summary(result, data, self.cov_type, self.confidence_level)
            self.covariance_ = self.summary_.covariance
        return self

    def summary(self) -> SummaryTable:
        check_is_fitted(self, "fit_result_")
        if self.summary_ is None:
            raise RuntimeError(
                f"fit failed ({self.fit_result_.failure.value}); no summary is available"
            )
        return self.summary_

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_result_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_[0] + self.intercept_[0]

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "fit_result_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        model = LogisticModel(self.fit_result_.beta_hat, self.fit_intercept)
        p1 = predict_proba(model, RowChunk(np.zeros(X.shape[0]), X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        p1 = self.predict_proba(X)[:, 1]
        return self.classes_[(p1 > 0.5).astype(int)]
