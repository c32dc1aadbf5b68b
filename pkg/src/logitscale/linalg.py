"""Dense kernels: Cholesky factorization, SPD solves and Gramian accumulation.

The Hessian of the logistic log-likelihood is a weighted Gramian,

    X^T D X = sum_i d_i x_i x_i^T,

so it can be built as a running sum of outer products, one chunk of rows
at a time, and partial sums from independent chunks simply add.  The
:class:`SymmetricAccumulator` holds that running sum in packed
upper-triangular form.

The factorization deliberately has no pivoting and no regularization
fallback: an ill-conditioned Hessian raises :class:`NotPositiveDefinite`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.blas import dsyrk

from .exceptions import DimensionMismatch, NotPositiveDefinite

__all__ = [
    "CholeskyFactor",
    "SymmetricAccumulator",
    "cholesky_decompose",
    "solve_spd",
    "invert_spd",
    "accumulate_weighted_outer",
    "merge_accumulators",
    "PIVOT_RTOL",
]

#: A pivot at or below ``PIVOT_RTOL * max(diag(A))`` is treated as singular.
PIVOT_RTOL = 1e-13
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T == A``."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def cholesky_decompose(A) -> CholeskyFactor:
    """Factor a symmetric matrix as ``L L^T`` without pivoting.

    Raises
    ------
    NotPositiveDefinite
        When a reduced pivot is not finite or does not exceed
        ``PIVOT_RTOL`` times the largest diagonal entry of ``A``.
    ValueError
        When ``A`` is not symmetric to within ``1e-12`` relative.
    """
    A = _as_square(A)
    scale = np.max(np.abs(A))
    if scale > 0 and np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric")

    k = A.shape[0]
    threshold = PIVOT_RTOL * max(float(np.max(np.diag(A))), 0.0)
    L = np.zeros_like(A)
    for j in range(k):
        row = L[j, :j]
        pivot = A[j, j] - row @ row
        if not (np.isfinite(pivot) and pivot > threshold):
            raise NotPositiveDefinite(j, float(pivot))
        ljj = np.sqrt(pivot)
        L[j, j] = ljj
        if j + 1 < k:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ row) / ljj
    return CholeskyFactor(L)


def solve_spd(factor: CholeskyFactor, b) -> np.ndarray:
    """Solve ``(L L^T) z = b`` by forward then back substitution.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.dim:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[0]} rows, factor is {factor.dim}x{factor.dim}"
        )
    w = solve_triangular(factor.lower, b, lower=True, check_finite=False)
    return solve_triangular(factor.lower, w, lower=True, trans="T", check_finite=False)


def invert_spd(A) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factor, symmetrized."""
    factor = cholesky_decompose(A)
    inv = solve_spd(factor, np.eye(factor.dim))
    return 0.5 * (inv + inv.T)


@dataclass
class SymmetricAccumulator:
    """Running sum of weighted outer products in packed upper-triangular form.

    ``packed`` holds the ``k(k+1)/2`` entries of the upper triangle in
    row-major order; ``count`` is the number of rows absorbed.
    """

    dim: int
    packed: np.ndarray = field(default=None)  # type: ignore[assignment]
    count: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("accumulator dimension must be >= 1")
        size = self.dim * (self.dim + 1) // 2
        if self.packed is None:
            self.packed = np.zeros(size)
        elif self.packed.shape != (size,):
            raise DimensionMismatch(f"packed storage must have {size} entries")

    @classmethod
    def zeros(cls, dim: int) -> "SymmetricAccumulator":
        return cls(dim)

    def _indices(self):
        return np.triu_indices(self.dim)

    def copy(self) -> "SymmetricAccumulator":
        return SymmetricAccumulator(self.dim, self.packed.copy(), self.count)

    def add_rows(self, X, weights) -> "SymmetricAccumulator":
        """Absorb ``sum_i w_i x_i x_i^T`` for the rows of ``X`` in place."""
        X = np.asarray(X, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(f"rows must have length {self.dim}, got shape {X.shape}")
        if weights.shape != (X.shape[0],):
            raise DimensionMismatch("one weight per row is required")
        if X.shape[0]:
            if np.any(weights < 0):
                raise ValueError("weights must be non-negative")
            self.add_gram(np.sqrt(weights)[:, None] * X)
        return self

    def add_gram(self, R) -> "SymmetricAccumulator":
        """Absorb ``R^T R``, one row per observation (``R = D^(1/2) X``)."""
        R = np.asarray(R, dtype=np.float64)
        if R.ndim != 2 or R.shape[1] != self.dim:
            raise DimensionMismatch(f"rows must have length {self.dim}, got shape {R.shape}")
        if R.shape[0]:
            # syrk on the transposed view: no copy, upper triangle only
            G = dsyrk(1.0, np.ascontiguousarray(R).T)
            self.packed += G[self._indices()]
            self.count += R.shape[0]
        return self

    def to_dense(self) -> np.ndarray:
        M = np.zeros((self.dim, self.dim))
        iu = self._indices()
        M[iu] = self.packed
        M.T[iu] = self.packed
        return M


def accumulate_weighted_outer(acc: SymmetricAccumulator, x, w: float) -> SymmetricAccumulator:
    """Return ``acc + w * x x^T`` as a new accumulator (row count + 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (acc.dim,):
        raise DimensionMismatch(f"vector of length {acc.dim} expected, got shape {x.shape}")
    if not (np.isfinite(w) and w >= 0):
        raise ValueError("weight must be finite and non-negative")
    iu = np.triu_indices(acc.dim)
    out = acc.copy()
    out.packed += w * np.outer(x, x)[iu]
    out.count += 1
    return out


def merge_accumulators(a: SymmetricAccumulator, b: SymmetricAccumulator) -> SymmetricAccumulator:
    if a.dim != b.dim:
        raise DimensionMismatch(f"cannot merge accumulators of dimension {a.dim} and {b.dim}")
    return SymmetricAccumulator(a.dim, a.packed + b.packed, a.count + b.count)
