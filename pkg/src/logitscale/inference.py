"""Inference for a fitted logistic model.

Covariance estimates
--------------------
``H = X^T D X`` with ``d_i = p_i (1 - p_i)`` is accumulated as a sum of
weighted outer products.  The model-based covariance is ``H^{-1}``.

The robust (sandwich) covariance is ``H^{-1} S H^{-1}`` with

    S = sum_i x_i x_i^T (y_i - p_i)^2 / (1 - h_ii),
    h_ii = d_i x_i^T H^{-1} x_i,

i.e. ``n^{-1} A^{-1} B A^{-1}`` for the averaged ``A = H/n`` and
``B = S/n``.  ``h_ii`` is the usual GLM leverage (the leverages sum to the
number of parameters).  It is obtained per chunk from the Cholesky factor
``L`` of ``H`` as ``d_i * ||L^{-1} x_i||^2``, a single forward substitution
for the whole block.  ``S`` is accumulated in the same pass as ``h``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaincc, ndtri

from .exceptions import (
    DegenerateResponse,
    DimensionMismatch,
    LeverageAtOne,
    NotPositiveDefinite,
    ZeroStandardError,
)
from .linalg import CholeskyFactor, SymmetricAccumulator, cholesky_decompose, solve_spd
from .model import Dataset, design_block, evaluate, hessian_weights, predict_proba
from .solvers import FitResult

__all__ = [
    "CovKind",
    "CovarianceEstimate",
    "CoefficientRow",
    "FitStatistics",
    "RocCurve",
    "SummaryTable",
    "normal_cdf",
    "normal_sf",
    "normal_quantile",
    "chi2_sf",
    "covariance_mle",
    "hat_diagonal",
    "covariance_sandwich",
    "wald_statistics",
    "fit_statistics",
    "roc_curve",
    "roc_auc",
    "build_summary",
]

LEVERAGE_CEILING = 1.0 - 1e-12


class CovKind(str, enum.Enum):
    MLE = "mle"
    SANDWICH = "sandwich"


@dataclass(frozen=True)
class CovarianceEstimate:
    kind: CovKind
    matrix: np.ndarray

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


# -- distribution functions ---------------------------------------------------


def normal_sf(z: float) -> float:
    """Upper tail ``1 - Phi(z)`` via ``erfc`` (no cancellation for large z)."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile(q: float) -> float:
    return float(ndtri(q))


def chi2_sf(x: float, df: int) -> float:
    """Chi-square survival function via the regularized upper incomplete gamma."""
    if df <= 0:
        return 1.0
    if x <= 0:
        return 1.0
    return float(gammaincc(0.5 * df, 0.5 * x))


# -- covariance -------------------------------------------------------------


def _check_fit(fit: FitResult) -> None:
    if not fit.converged:
        warnings.warn(
            f"fit did not reach the gradient tolerance (stop reason: {fit.stop_reason.value}); "
            "covariance is evaluated at the returned estimate",
            RuntimeWarning,
            stacklevel=3,
        )


def _information(fit: FitResult, data: Dataset) -> SymmetricAccumulator:
    return evaluate(fit.model, data, want_hessian=True).hessian_acc


def _factor_with_diagnostics(H: np.ndarray) -> CholeskyFactor:
    try:
        return cholesky_decompose(H)
    except NotPositiveDefinite as exc:
        cond = np.linalg.cond(H)
        raise NotPositiveDefinite(
            exc.pivot_index, exc.pivot_value, f"condition number of X^T D X ~ {cond:.3e}"
        ) from exc


def _inverse(factor: CholeskyFactor) -> np.ndarray:
    inv = solve_spd(factor, np.eye(factor.dim))
    return 0.5 * (inv + inv.T)


def covariance_mle(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Inverse observed information ``[X^T D(beta_hat) X]^{-1}``."""
    _check_fit(fit)
    H = _information(fit, data).to_dense()
    inv = _inverse(_factor_with_diagnostics(H))
    return CovarianceEstimate(CovKind.MLE, inv)


def _chunk_leverage(fit, chunk, factor: CholeskyFactor):
    Xd = design_block(chunk, fit.has_intercept)
    p = predict_proba(fit.model, chunk)
    d = hessian_weights(p)
    W = solve_triangular(factor.lower, Xd.T, lower=True, check_finite=False)
    h = d * np.einsum("ij,ij->j", W, W)
    return Xd, p, h


def hat_diagonal(fit: FitResult, data: Dataset, hessian: np.ndarray | None = None) -> np.ndarray:
    """Leverages ``h_ii = d_i x_i^T (X^T D X)^{-1} x_i`` for every row, in order.

    ``hessian`` is ``X^T D X`` at ``fit.beta_hat``; it is recomputed when
    omitted.
    """
    H = _information(fit, data).to_dense() if hessian is None else np.asarray(hessian, float)
    if H.shape != (fit.k, fit.k):
        raise DimensionMismatch(f"Hessian must be {fit.k}x{fit.k}")
    factor = _factor_with_diagnostics(H)
    return np.concatenate([_chunk_leverage(fit, c, factor)[2] for c in data.chunks()])


def covariance_sandwich(fit: FitResult, data: Dataset) -> CovarianceEstimate:
    """Heteroskedasticity-robust covariance with the ``1/(1 - h_ii)`` correction."""
    _check_fit(fit)
    H = _information(fit, data).to_dense()
    factor = _factor_with_diagnostics(H)
    meat = SymmetricAccumulator(fit.k)
    offset = 0
    for chunk in data.chunks():
        Xd, p, h = _chunk_leverage(fit, chunk, factor)
        bad = np.flatnonzero(~(h < LEVERAGE_CEILING))
        if bad.size:
            raise LeverageAtOne(offset + int(bad[0]), float(h[bad[0]]))
        meat.add_rows(Xd, (chunk.y - p) ** 2 / (1.0 - h))
        offset += chunk.n_rows
    H_inv = _inverse(factor)
    V = H_inv @ meat.to_dense() @ H_inv
    return CovarianceEstimate(CovKind.SANDWICH, 0.5 * (V + V.T))


# -- per-coefficient and global statistics ------------------------------------


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    estimate: float
    std_error: float
    z_value: float
    p_value: float
    ci_low: float
    ci_high: float


def wald_statistics(
    est,
    cov: CovarianceEstimate,
    level: float = 0.95,
    names=None,
) -> list[CoefficientRow]:
    """Wald z statistics, two-sided normal p-values and confidence intervals."""
    est = np.asarray(est, dtype=float).reshape(-1)
    V = np.asarray(cov.matrix, dtype=float)
    if V.shape != (est.size, est.size):
        raise DimensionMismatch(f"covariance is {V.shape}, estimate has {est.size} entries")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    names = list(names) if names is not None else [f"b{j}" for j in range(est.size)]
    q = normal_quantile(0.5 * (1.0 + level))
    rows = []
    for j, b in enumerate(est):
        var = max(float(V[j, j]), 0.0)
        se = math.sqrt(var)
        if se == 0.0:
            if b != 0.0:
                raise ZeroStandardError(f"zero standard error for non-zero coefficient {names[j]}")
            z = 0.0
        else:
            z = b / se
        p = min(1.0, 2.0 * normal_sf(abs(z)))
        rows.append(CoefficientRow(names[j], float(b), se, z, p, b - q * se, b + q * se))
    return rows


@dataclass(frozen=True)
class FitStatistics:
    aic: float
    mcfadden_r2: float
    lr_statistic: float
    lr_df: int
    lr_p_value: float


def fit_statistics(fit: FitResult) -> FitStatistics:
    ll, ll0 = fit.final_log_likelihood, fit.null_log_likelihood
    df = fit.k - 1 if fit.has_intercept else fit.k
    lr = 2.0 * (ll - ll0)
    return FitStatistics(
        aic=2.0 * fit.k - 2.0 * ll,
        mcfadden_r2=1.0 - ll / ll0,
        lr_statistic=lr,
        lr_df=df,
        lr_p_value=chi2_sf(lr, df),
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_curve(scores, y) -> RocCurve:
    """ROC by a descending threshold sweep; tied scores form one step.

    The area uses the trapezoid rule, which equals the Mann-Whitney
    statistic with ties counted as one half.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if scores.shape != y.shape:
        raise DimensionMismatch("one score per response is required")
    n_pos = float(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateResponse("ROC needs both classes")
    order = np.argsort(-scores, kind="mergesort")
    s, yy = scores[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(yy)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))
    return RocCurve(fpr, tpr, np.r_[np.inf, s[ends]], auc)


def roc_auc(fit: FitResult, data: Dataset) -> RocCurve:
    model = fit.model
    scores, ys = [], []
    for chunk in data.chunks():
        scores.append(predict_proba(model, chunk))
        ys.append(chunk.y)
    return roc_curve(np.concatenate(scores), np.concatenate(ys))


# -- summary ------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryTable:
    coefficients: list[CoefficientRow]
    n: int
    k: int
    log_likelihood: float
    null_log_likelihood: float
    aic: float
    mcfadden_r2: float
    lr_statistic: float
    lr_df: int
    lr_p_value: float
    auc: float
    covariance_kind: CovKind
    confidence_level: float
    response_name: str = "y"
    solver: str = ""
    converged: bool = True
    iterations: int = 0
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def names(self) -> list[str]:
        return [r.name for r in self.coefficients]

    def column(self, attr: str) -> np.ndarray:
        return np.array([getattr(r, attr) for r in self.coefficients])


def build_summary(
    fit: FitResult,
    data: Dataset,
    cov_kind: CovKind | str = CovKind.SANDWICH,
    level: float = 0.95,
) -> SummaryTable:
    """Assemble coefficient rows and global fit statistics into one table."""
    cov_kind = CovKind(cov_kind)
    cov = covariance_sandwich(fit, data) if cov_kind is CovKind.SANDWICH else covariance_mle(fit, data)
    rows = wald_statistics(fit.beta_hat, cov, level, fit.coef_names)
    stats = fit_statistics(fit)
    roc = roc_auc(fit, data)
    return SummaryTable(
        coefficients=rows,
        n=fit.n,
        k=fit.k,
        log_likelihood=fit.final_log_likelihood,
        null_log_likelihood=fit.null_log_likelihood,
        aic=stats.aic,
        mcfadden_r2=stats.mcfadden_r2,
        lr_statistic=stats.lr_statistic,
        lr_df=stats.lr_df,
        lr_p_value=stats.lr_p_value,
        auc=roc.auc,
        covariance_kind=cov_kind,
        confidence_level=level,
        response_name=getattr(data, "response_name", "y"),
        solver=fit.method.value,
        converged=fit.converged,
        iterations=fit.iterations,
        covariance=cov.matrix,
    )
