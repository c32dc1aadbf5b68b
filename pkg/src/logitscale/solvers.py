"""Maximum-likelihood solvers: IRLS (Newton + Cholesky) and L-BFGS.

IRLS re-factors the full Hessian every iteration with a plain Cholesky
decomposition.  On near-collinear designs that factorization either breaks
down or returns a numerically meaningless step; both outcomes are left
visible in :class:`FitResult` instead of being repaired.

L-BFGS never forms or inverts the Hessian.  It keeps the last ``m``
(step, gradient change) pairs and applies the implicit inverse-Hessian
approximation with the two-loop recursion.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import DegenerateResponse, DimensionMismatch, InvalidConfig, NotPositiveDefinite
from .linalg import cholesky_decompose, solve_spd
from .model import Dataset, LogisticModel, evaluate

__all__ = [
    "Method",
    "Failure",
    "StopReason",
    "SolverConfig",
    "FitResult",
    "fit",
    "fit_irls",
    "fit_lbfgs",
    "null_log_likelihood",
]

ARMIJO_C1 = 1e-4
IRLS_MAX_HALVINGS = 30
LBFGS_MAX_HALVINGS = 50
# Allowance for rounding in the objective: near the optimum a genuine
# improvement is far below the resolution of a sum over n rows.
_F_RTOL = 1e-12
# A step whose gradient sup-norm falls below this fraction of the previous
# one is still making progress, however small the log-likelihood change.
_GRAD_PROGRESS = 0.9


class Method(str, enum.Enum):
    IRLS = "irls"
    LBFGS = "lbfgs"


class StopReason(str, enum.Enum):
    GRADIENT = "gradient"
    LOGLIK_CHANGE = "loglik_change"
    FAILURE = "failure"


class Failure(str, enum.Enum):
    HESSIAN_NOT_PD = "HessianNotPD"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH = "LineSearchFailure"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.LBFGS
    tol: float = 1e-8
    max_iter: int | None = None
    lbfgs_memory: int = 10
    line_search: str = "backtracking_armijo"
    ll_rtol: float = 1e-10
    n_jobs: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.tol > 0:
            raise InvalidConfig("tol must be positive")
        if not self.ll_rtol >= 0:
            raise InvalidConfig("ll_rtol must be non-negative")
        if self.max_iter is not None and self.max_iter < 1:
            raise InvalidConfig("max_iter must be >= 1")
        if self.lbfgs_memory < 1:
            raise InvalidConfig("lbfgs_memory must be >= 1")
        if self.line_search != "backtracking_armijo":
            raise InvalidConfig(f"unsupported line search {self.line_search!r}")

    @property
    def iteration_limit(self) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 100 if self.method is Method.IRLS else 500


@dataclass(frozen=True)
class FitResult:
    beta_hat: np.ndarray
    converged: bool
    iterations: int
    final_log_likelihood: float
    null_log_likelihood: float
    n: int
    k: int
    has_intercept: bool
    method: Method
    gradient_norm: float
    failure: Failure | None = None
    failure_detail: str = ""
    stop_reason: StopReason = StopReason.GRADIENT
    column_names: tuple[str, ...] = ()
    log_likelihood_path: tuple[float, ...] = field(default=(), repr=False)

    @property
    def model(self) -> LogisticModel:
        return LogisticModel(self.beta_hat, self.has_intercept)

    @property
    def coef_names(self) -> tuple[str, ...]:
        names = tuple(self.column_names)
        return (("(Intercept)",) + names) if self.has_intercept else names


def null_log_likelihood(n: int, n_positive: int, has_intercept: bool = True) -> float:
    """Log-likelihood of the intercept-only model (of ``beta = 0`` without intercept)."""
    if not has_intercept:
        return n * np.log(0.5)
    m = n - n_positive
    return float(n_positive * np.log(n_positive / n) + m * np.log(m / n))


def _prepare(data: Dataset, has_intercept: bool) -> tuple[int, int, int]:
    n, pos = data.n_rows, data.n_positive
    if pos == 0 or pos == n:
        raise DegenerateResponse("response takes a single value; the MLE does not exist")
    k = data.n_features + int(has_intercept)
    if k < 1:
        raise DimensionMismatch("model has no parameters")
    return n, pos, k


def _slack(f: float) -> float:
    return _F_RTOL * max(1.0, abs(f))


def _stalled(ev_old, ev_new, cfg: SolverConfig) -> bool:
    """Log-likelihood flat to ``ll_rtol`` relative and the gradient not shrinking."""
    ll_old, ll_new = ev_old.log_likelihood, ev_new.log_likelihood
    if abs(ll_new - ll_old) > cfg.ll_rtol * max(1.0, abs(ll_old)):
        return False
    g_old = np.max(np.abs(ev_old.gradient))
    g_new = np.max(np.abs(ev_new.gradient))
    return g_new >= _GRAD_PROGRESS * g_old


def _result(data, cfg, beta, ev, it, ll0, n, k, has_intercept, path, failure=None, detail="",
            reason=None):
    gnorm = float(np.max(np.abs(ev.gradient)))
    if reason is None:
        reason = StopReason.GRADIENT if failure is None else StopReason.FAILURE
    return FitResult(
        beta_hat=beta.copy(),
        converged=failure is None and gnorm <= cfg.tol,
        iterations=it,
        final_log_likelihood=ev.log_likelihood,
        null_log_likelihood=ll0,
        n=n,
        k=k,
        has_intercept=has_intercept,
        method=cfg.method,
        gradient_norm=gnorm,
        failure=failure,
        failure_detail=detail,
        stop_reason=reason,
        column_names=data.column_names,
        log_likelihood_path=tuple(path),
    )


def fit_irls(data: Dataset, config: SolverConfig | None = None, has_intercept: bool = True) -> FitResult:
    """Newton-Raphson on the log-likelihood with step halving.

    Each iteration solves ``H(beta) step = grad(beta)`` through a fresh
    Cholesky factorization.  A failed factorization ends the fit with
    ``failure=HessianNotPD``.
    """
    cfg = replace(config or SolverConfig(), method=Method.IRLS)
    n, pos, k = _prepare(data, has_intercept)
    ll0 = null_log_likelihood(n, pos, has_intercept)

    beta = np.zeros(k)
    ev = evaluate(LogisticModel(beta, has_intercept), data, True, cfg.n_jobs)
    path = [ev.log_likelihood]
    for it in range(cfg.iteration_limit):
        if np.max(np.abs(ev.gradient)) <= cfg.tol:
            return _result(data, cfg, beta, ev, it, ll0, n, k, has_intercept, path)
        try:
            factor = cholesky_decompose(ev.hessian)
        except NotPositiveDefinite as exc:
            return _result(data, cfg, beta, ev, it, ll0, n, k, has_intercept, path,
                           Failure.HESSIAN_NOT_PD, str(exc))
        step = solve_spd(factor, ev.gradient)
        t = 1.0
        for _ in range(IRLS_MAX_HALVINGS + 1):
            cand = beta + t * step
            if np.all(np.isfinite(cand)):
                ev_new = evaluate(LogisticModel(cand, has_intercept), data, True, cfg.n_jobs)
                if ev_new.log_likelihood >= ev.log_likelihood - _slack(ev.log_likelihood):
                    break
            t *= 0.5
        else:
            return _result(data, cfg, beta, ev, it + 1, ll0, n, k, has_intercept, path,
                           Failure.LINE_SEARCH, "no step-halving restored the log-likelihood")
        stalled = _stalled(ev, ev_new, cfg)
        beta, ev = cand, ev_new
        path.append(ev.log_likelihood)
        if stalled:
            return _result(data, cfg, beta, ev, it + 1, ll0, n, k, has_intercept, path,
                           reason=StopReason.LOGLIK_CHANGE)

    if np.max(np.abs(ev.gradient)) <= cfg.tol:
        return _result(data, cfg, beta, ev, cfg.iteration_limit, ll0, n, k, has_intercept, path)
    return _result(data, cfg, beta, ev, cfg.iteration_limit, ll0, n, k, has_intercept, path,
                   Failure.MAX_ITERATIONS)


def _two_loop(g: np.ndarray, history: deque) -> np.ndarray:
    """Apply the L-BFGS inverse-Hessian approximation to ``g``."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    s, y, _ = history[-1]
    r = ((s @ y) / (y @ y)) * q
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return r


def fit_lbfgs(data: Dataset, config: SolverConfig | None = None, has_intercept: bool = True) -> FitResult:
    """Limited-memory BFGS on the negative log-likelihood.

    Armijo backtracking (``c1 = 1e-4``, halving) from a unit trial step;
    the very first step is scaled to unit length because no curvature
    information exists yet.
    """
    cfg = replace(config or SolverConfig(), method=Method.LBFGS)
    n, pos, k = _prepare(data, has_intercept)
    ll0 = null_log_likelihood(n, pos, has_intercept)

    def objective(b):
        ev = evaluate(LogisticModel(b, has_intercept), data, False, cfg.n_jobs)
        return ev, -ev.log_likelihood, -ev.gradient

    beta = np.zeros(k)
    ev, f, g = objective(beta)
    path = [ev.log_likelihood]
    history: deque = deque(maxlen=cfg.lbfgs_memory)
    for it in range(cfg.iteration_limit):
        if np.max(np.abs(g)) <= cfg.tol:
            return _result(data, cfg, beta, ev, it, ll0, n, k, has_intercept, path)
        if history:
            d = -_two_loop(g, history)
            t = 1.0
        else:
            d = -g
            t = 1.0 / np.linalg.norm(g)
        slope = g @ d
        if not slope < 0:
            # approximation lost descent; restart from steepest descent
            history.clear()
            d, slope, t = -g, -(g @ g), 1.0 / np.linalg.norm(g)
        for _ in range(LBFGS_MAX_HALVINGS + 1):
            cand = beta + t * d
            if np.all(np.isfinite(cand)):
                ev_new, f_new, g_new = objective(cand)
                if f_new <= f + ARMIJO_C1 * t * slope + _slack(f):
                    break
            t *= 0.5
        else:
            return _result(data, cfg, beta, ev, it + 1, ll0, n, k, has_intercept, path,
                           Failure.LINE_SEARCH, "Armijo condition not met after 50 halvings")
        s = cand - beta
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            history.append((s, yv, 1.0 / sy))
        stalled = _stalled(ev, ev_new, cfg)
        beta, ev, f, g = cand, ev_new, f_new, g_new
        path.append(ev.log_likelihood)
        if stalled:
            return _result(data, cfg, beta, ev, it + 1, ll0, n, k, has_intercept, path,
                           reason=StopReason.LOGLIK_CHANGE)

    if np.max(np.abs(g)) <= cfg.tol:
        return _result(data, cfg, beta, ev, cfg.iteration_limit, ll0, n, k, has_intercept, path)
    return _result(data, cfg, beta, ev, cfg.iteration_limit, ll0, n, k, has_intercept, path,
                   Failure.MAX_ITERATIONS)


def fit(data: Dataset, config: SolverConfig | None = None, has_intercept: bool = True) -> FitResult:
    """Fit by maximum likelihood with the solver named in ``config.method``."""
    cfg = config or SolverConfig()
    if cfg.method is Method.IRLS:
        return fit_irls(data, cfg, has_intercept)
    return fit_lbfgs(data, cfg, has_intercept)
