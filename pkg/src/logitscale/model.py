"""Logistic model: probabilities, log-likelihood, gradient and Hessian.

Data arrive as a :class:`Dataset`, a re-iterable sequence of
:class:`RowChunk` blocks.  Every quantity is a sum over rows, so each chunk
contributes a partial result and partials are merged in chunk-index order.
The intercept is never stored; when ``has_intercept`` is set each chunk is
prefixed with a constant column only while it is being reduced.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy.special import expit

from .exceptions import DimensionMismatch, EmptyDataset
from .linalg import SymmetricAccumulator, merge_accumulators

__all__ = [
    "PROB_CLIP",
    "sigmoid",
    "LogisticModel",
    "RowChunk",
    "Dataset",
    "Evaluation",
    "design_block",
    "predict_proba",
    "log_likelihood",
    "gradient",
    "hessian",
    "evaluate",
]

#: Probabilities are clamped to ``[PROB_CLIP, 1 - PROB_CLIP]`` inside the
#: log-likelihood and the Hessian weights.
PROB_CLIP = 1e-15
_LOG_LO = np.log(PROB_CLIP)
_LOG_HI = np.log1p(-PROB_CLIP)

DEFAULT_CHUNK_SIZE = 65536


def sigmoid(t):
    """Logistic function ``1 / (1 + exp(-t))``, stable at both tails."""
    return expit(t)


@dataclass(frozen=True)
class LogisticModel:
    beta: np.ndarray
    has_intercept: bool = True

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        if beta.ndim != 1 or beta.size == 0:
            raise DimensionMismatch("beta must be a non-empty vector")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta has non-finite entries")
        object.__setattr__(self, "beta", beta)

    @property
    def n_params(self) -> int:
        return self.beta.size

    @property
    def n_features(self) -> int:
        return self.beta.size - int(self.has_intercept)


@dataclass(frozen=True)
class RowChunk:
    """A block of rows: 0/1 responses and a dense feature matrix."""

    y: np.ndarray
    X: np.ndarray
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size == y.size else X.reshape(y.size, -1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DimensionMismatch(
                f"{y.size} responses but feature block has shape {X.shape}"
            )
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("responses must be 0 or 1")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatch(f"{len(names)} column names for {X.shape[1]} columns")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_names", names)

    @property
    def n_rows(self) -> int:
        return self.y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


class Dataset:
    """Re-iterable collection of row chunks.

    ``source`` is either a sequence of chunks kept in memory or a
    zero-argument callable returning a fresh chunk iterator; the latter
    supports out-of-core data that is re-read on every pass.
    """

    def __init__(
        self,
        source: Sequence[RowChunk] | Callable[[], Iterator[RowChunk]],
        column_names: Sequence[str] | None = None,
        response_name: str = "y",
    ):
        if callable(source):
            self._factory = source
            self._chunks: list[RowChunk] | None = None
        else:
            self._chunks = list(source)
            self._factory = None
        self._names = tuple(column_names) if column_names is not None else None
        self.response_name = response_name
        self._stats: tuple[int, float] | None = None

    @classmethod
    def from_arrays(
        cls,
        X,
        y,
        column_names: Sequence[str] | None = None,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        response_name: str = "y",
    ) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"X has {X.shape[0]} rows but y has {y.size}")
        if chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        names = tuple(column_names) if column_names is not None else tuple(
            f"x{j + 1}" for j in range(X.shape[1])
        )
        chunks = [
            RowChunk(y[i : i + chunk_size], X[i : i + chunk_size], names)
            for i in range(0, y.size, chunk_size)
        ]
        return cls(chunks, names, response_name)

    @property
    def streamed(self) -> bool:
        return self._factory is not None

    def chunks(self) -> Iterator[RowChunk]:
        if self._chunks is not None:
            return iter(self._chunks)
        return iter(self._factory())

    def __iter__(self) -> Iterator[RowChunk]:
        return self.chunks()

    def _scan(self) -> tuple[int, float]:
        if self._stats is None:
            n, pos = 0, 0.0
            for chunk in self.chunks():
                n += chunk.n_rows
                pos += float(chunk.y.sum())
                if self._names is None:
                    self._names = chunk.column_names
            if n == 0:
                raise EmptyDataset("dataset has no rows")
            self._stats = (n, pos)
        return self._stats

    @property
    def n_rows(self) -> int:
        return self._scan()[0]

    @property
    def n_positive(self) -> int:
        return int(self._scan()[1])

    @property
    def column_names(self) -> tuple[str, ...]:
        if self._names is None:
            self._scan()
        return self._names  # type: ignore[return-value]

    @property
    def n_features(self) -> int:
        return len(self.column_names)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        parts = list(self.chunks())
        if not parts:
            raise EmptyDataset("dataset has no rows")
        return np.vstack([c.X for c in parts]), np.concatenate([c.y for c in parts])

    def materialize(self) -> "Dataset":
        """In-memory copy of a streamed dataset (chunk boundaries kept)."""
        if not self.streamed:
            return self
        return Dataset(list(self.chunks()), self._names, self.response_name)


def design_block(chunk: RowChunk, has_intercept: bool) -> np.ndarray:
    """Feature block as seen by the model (constant column prefixed if needed)."""
    if not has_intercept:
        return chunk.X
    out = np.empty((chunk.n_rows, chunk.n_features + 1))
    out[:, 0] = 1.0
    out[:, 1:] = chunk.X
    return out


def _check_width(model: LogisticModel, chunk: RowChunk) -> None:
    if chunk.n_features != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, chunk has {chunk.n_features}"
        )


def _linear_predictor(model: LogisticModel, chunk: RowChunk) -> np.ndarray:
    _check_width(model, chunk)
    if model.has_intercept:
        return model.beta[0] + chunk.X @ model.beta[1:]
    return chunk.X @ model.beta


def _loglik_terms(eta: np.ndarray, y: np.ndarray) -> np.ndarray:
    # log p = -log(1 + e^-eta), log(1 - p) = log p - eta; clamped as if p were clipped
    log_p = -np.logaddexp(0.0, -eta)
    log_q = log_p - eta
    np.clip(log_p, _LOG_LO, _LOG_HI, out=log_p)
    np.clip(log_q, _LOG_LO, _LOG_HI, out=log_q)
    return y * log_p + (1.0 - y) * log_q


def hessian_weights(p: np.ndarray) -> np.ndarray:
    pc = np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)
    return pc * (1.0 - pc)


def predict_proba(model: LogisticModel, chunk: RowChunk) -> np.ndarray:
    return sigmoid(_linear_predictor(model, chunk))


@dataclass(frozen=True)
class Evaluation:
    """Log-likelihood, gradient and (optionally) Hessian at one ``beta``."""

    log_likelihood: float
    gradient: np.ndarray
    hessian_acc: SymmetricAccumulator | None
    n: int

    @property
    def hessian(self) -> np.ndarray:
        if self.hessian_acc is None:
            raise ValueError("evaluation was computed without the Hessian")
        return self.hessian_acc.to_dense()


def _chunk_evaluation(model: LogisticModel, chunk: RowChunk, want_hessian: bool) -> Evaluation:
    eta = _linear_predictor(model, chunk)
    p = sigmoid(eta)
    ll = float(np.sum(_loglik_terms(eta, chunk.y)))
    resid = chunk.y - p
    if model.has_intercept:
        grad = np.empty(model.n_params)
        grad[0] = resid.sum()
        grad[1:] = chunk.X.T @ resid
    else:
        grad = chunk.X.T @ resid
    acc = None
    if want_hessian:
        root = np.sqrt(hessian_weights(p))
        R = np.empty((chunk.n_rows, model.n_params))
        if model.has_intercept:
            R[:, 0] = root
            np.multiply(chunk.X, root[:, None], out=R[:, 1:])
        else:
            np.multiply(chunk.X, root[:, None], out=R)
        acc = SymmetricAccumulator(model.n_params).add_gram(R)
    return Evaluation(ll, grad, acc, chunk.n_rows)


def _merge(a: Evaluation, b: Evaluation) -> Evaluation:
    acc = None
    if a.hessian_acc is not None and b.hessian_acc is not None:
        acc = merge_accumulators(a.hessian_acc, b.hessian_acc)
    return Evaluation(a.log_likelihood + b.log_likelihood, a.gradient + b.gradient, acc, a.n + b.n)


def map_chunks(fn: Callable[[RowChunk], object], data: Iterable[RowChunk], n_jobs: int | None = None) -> list:
    """Apply ``fn`` to every chunk, results in chunk order.

    With ``n_jobs > 1`` chunks are processed on a thread pool; numpy
    releases the GIL inside the heavy kernels.  Output order is always the
    input order, so merges downstream stay deterministic.
    """
    if n_jobs is None or n_jobs == 1:
        return [fn(c) for c in data]
    with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
        return list(pool.map(fn, data))


def evaluate(
    model: LogisticModel,
    data: Dataset | Iterable[RowChunk],
    want_hessian: bool = True,
    n_jobs: int | None = None,
) -> Evaluation:
    """One fused pass: log-likelihood, gradient and Hessian accumulator."""
    parts = map_chunks(lambda c: _chunk_evaluation(model, c, want_hessian), data, n_jobs)
    if not parts:
        raise EmptyDataset("dataset has no rows")
    out = parts[0]
    for part in parts[1:]:
        out = _merge(out, part)
    return out


def log_likelihood(model: LogisticModel, data: Dataset | Iterable[RowChunk]) -> float:
    total = 0.0
    seen = False
    for chunk in data:
        total += float(np.sum(_loglik_terms(_linear_predictor(model, chunk), chunk.y)))
        seen = True
    if not seen:
        raise EmptyDataset("dataset has no rows")
    return total


def gradient(model: LogisticModel, data: Dataset | Iterable[RowChunk]) -> np.ndarray:
    return evaluate(model, data, want_hessian=False).gradient


def hessian(model: LogisticModel, data: Dataset | Iterable[RowChunk]) -> np.ndarray:
    """Observed information ``sum_i d_i x_i x_i^T`` with ``d_i = p_i (1 - p_i)``.

    This is the negative Hessian of the log-likelihood, i.e. the matrix
    whose inverse is the MLE covariance.
    """
    return evaluate(model, data, want_hessian=True).hessian
