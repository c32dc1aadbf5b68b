"""Deterministic synthetic data: PCG-XSH-RR-32, Box-Muller normals, Bernoulli responses.

Bulk generation is vectorized across "lanes": a request for ``N`` outputs
splits the stream into ``L`` contiguous segments, jumps each lane to the
start of its segment with the LCG jump-ahead, and steps all lanes together
with numpy ``uint64`` arithmetic (which wraps mod 2**64).  Concatenating
the lanes reproduces the sequential stream bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .exceptions import InvalidConfig
from .model import Dataset, RowChunk, sigmoid

__all__ = [
    "Pcg32",
    "pcg32_next",
    "standard_normal",
    "DataGenConfig",
    "draw_beta",
    "iter_chunks",
    "gen_dataset",
    "stream_dataset",
    "correlation_level",
]

MULTIPLIER = 6364136223846793005
MASK64 = (1 << 64) - 1
MASK32 = (1 << 32) - 1
_LANES = 16384
_TWO_PI = 2.0 * math.pi


def _output(state: int) -> int:
    xorshifted = (((state >> 18) ^ state) >> 27) & MASK32
    rot = state >> 59
    return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & MASK32


def _affine_power(delta: int, mult: int, plus: int) -> tuple[int, int]:
    """Coefficients ``(A, C)`` of ``delta`` LCG steps: ``s -> A*s + C``."""
    acc_mult, acc_plus = 1, 0
    while delta > 0:
        if delta & 1:
            acc_mult = (acc_mult * mult) & MASK64
            acc_plus = (acc_plus * mult + plus) & MASK64
        plus = ((mult + 1) * plus) & MASK64
        mult = (mult * mult) & MASK64
        delta >>= 1
    return acc_mult, acc_plus


class Pcg32:
    """PCG-XSH-RR generator with 64-bit state and 32-bit output.

    Seeded with the reference two-step procedure: ``inc = 2*initseq + 1``,
    step, add ``initstate``, step.
    """

    __slots__ = ("state", "inc", "_spare")

    def __init__(self, initstate: int = 0, initseq: int = 0):
        self.inc = ((initseq << 1) | 1) & MASK64
        self.state = 0
        self._step()
        self.state = (self.state + (initstate & MASK64)) & MASK64
        self._step()
        self._spare: float | None = None

    @classmethod
    def from_state(cls, state: int, inc: int) -> "Pcg32":
        if inc % 2 == 0:
            raise ValueError("increment must be odd")
        obj = cls.__new__(cls)
        obj.state, obj.inc, obj._spare = state & MASK64, inc & MASK64, None
        return obj

    def _step(self) -> None:
        self.state = (self.state * MULTIPLIER + self.inc) & MASK64

    def next_u32(self) -> int:
        old = self.state
        self._step()
        return _output(old)

    def advance(self, delta: int) -> None:
        a, c = _affine_power(delta & MASK64, MULTIPLIER, self.inc)
        self.state = (a * self.state + c) & MASK64

    def u32_block(self, count: int) -> np.ndarray:
        """Next ``count`` outputs as a ``uint32`` array (same as ``count`` calls)."""
        if count <= 0:
            return np.empty(0, dtype=np.uint32)
        lanes = min(count, _LANES)
        steps = -(-count // lanes)
        a, c = _affine_power(steps, MULTIPLIER, self.inc)
        starts = [self.state]
        for _ in range(lanes - 1):
            starts.append((a * starts[-1] + c) & MASK64)
        s = np.array(starts, dtype=np.uint64)
        mult = np.uint64(MULTIPLIER)
        inc = np.uint64(self.inc)
        out = np.empty((steps, lanes), dtype=np.uint32)
        for t in range(steps):
            x = (((s >> np.uint64(18)) ^ s) >> np.uint64(27)).astype(np.uint32)
            rot = (s >> np.uint64(59)).astype(np.uint32)
            out[t] = (x >> rot) | (x << ((-rot) & np.uint32(31)))
            s = s * mult + inc
        self.advance(count)
        return out.T.reshape(-1)[:count]

    def uniforms(self, count: int) -> np.ndarray:
        """Uniform doubles on ``(0, 1]``: ``(u32 + 1) / 2**32``."""
        return (self.u32_block(count).astype(np.float64) + 1.0) / 4294967296.0

    def normals(self, count: int) -> np.ndarray:
        """Standard normals by Box-Muller; both members of each pair are used."""
        out = np.empty(count)
        start = 0
        if count and self._spare is not None:
            out[0] = self._spare
            self._spare = None
            start = 1
        need = count - start
        if need > 0:
            pairs = -(-need // 2)
            u = self.uniforms(2 * pairs)
            r = np.sqrt(-2.0 * np.log(u[0::2]))
            theta = _TWO_PI * u[1::2]
            z = np.empty(2 * pairs)
            z[0::2] = r * np.cos(theta)
            z[1::2] = r * np.sin(theta)
            out[start:] = z[:need]
            if 2 * pairs > need:
                self._spare = float(z[-1])
        return out

    def next_normal(self) -> float:
        return float(self.normals(1)[0])


def pcg32_next(s: Pcg32) -> tuple[Pcg32, int]:
    """Functional form: returns the advanced generator and the output."""
    nxt = Pcg32.from_state(s.state, s.inc)
    value = nxt.next_u32()
    return nxt, value


def standard_normal(s: Pcg32) -> tuple[Pcg32, float]:
    nxt = Pcg32.from_state(s.state, s.inc)
    nxt._spare = s._spare
    value = nxt.next_normal()
    return nxt, value


def correlation_level(level: int) -> float:
    """``1 - 0.1**level``; level 0 means independent features."""
    return 0.0 if level == 0 else 1.0 - 0.1**level


@dataclass(frozen=True)
class DataGenConfig:
    """Synthetic logistic data.  ``beta`` of length ``k``; no intercept term.

    Row block ``b`` is drawn from stream ``stream + 1 + b``; a seed-derived
    ``beta`` comes from ``stream`` itself.
    """

    n: int
    k: int
    correlation: float | None = None
    beta: tuple[float, ...] | None = None
    seed: int = 0
    stream: int = 0
    block_rows: int = 65536

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise InvalidConfig("n and k must be >= 1")
        if self.block_rows < 1:
            raise InvalidConfig("block_rows must be >= 1")
        if self.correlation is not None:
            if not (0.0 <= self.correlation < 1.0):
                raise InvalidConfig("correlation must lie in [0, 1)")
            if self.k < 2:
                raise InvalidConfig("correlation needs at least two features")
        if self.beta is not None:
            beta = tuple(float(b) for b in np.asarray(self.beta, dtype=float).reshape(-1))
            if len(beta) != self.k:
                raise InvalidConfig(f"beta has {len(beta)} entries for k={self.k}")
            if not all(math.isfinite(b) for b in beta):
                raise InvalidConfig("beta must be finite")
            object.__setattr__(self, "beta", beta)


def draw_beta(k: int, seed: int, stream: int) -> np.ndarray:
    """``k`` i.i.d. ``N(0, 1/k)`` coefficients so that ``x^T beta`` is O(1)."""
    return Pcg32(seed, stream).normals(k) / math.sqrt(k)


def _mixing(k: int, rho: float | None) -> np.ndarray | None:
    """Lower Cholesky factor of the feature correlation matrix."""
    if not rho:
        return None
    if k == 2:
        return np.array([[1.0, 0.0], [rho, math.sqrt((1.0 - rho) * (1.0 + rho))]])
    corr = np.full((k, k), rho)
    np.fill_diagonal(corr, 1.0)
    return np.linalg.cholesky(corr)


def _true_beta(cfg: DataGenConfig) -> np.ndarray:
    if cfg.beta is not None:
        return np.array(cfg.beta)
    return draw_beta(cfg.k, cfg.seed, cfg.stream)


def iter_chunks(cfg: DataGenConfig, beta: np.ndarray | None = None) -> Iterator[RowChunk]:
    beta = _true_beta(cfg) if beta is None else beta
    mix = _mixing(cfg.k, cfg.correlation)
    names = tuple(f"x{j + 1}" for j in range(cfg.k))
    for b, start in enumerate(range(0, cfg.n, cfg.block_rows)):
        rows = min(cfg.block_rows, cfg.n - start)
        rng = Pcg32(cfg.seed, (cfg.stream + 1 + b) & MASK64)
        X = rng.normals(rows * cfg.k).reshape(rows, cfg.k)
        if mix is not None:
            X = X @ mix.T
        p = sigmoid(X @ beta)
        y = (rng.uniforms(rows) <= p).astype(np.float64)
        yield RowChunk(y, X, names)


def gen_dataset(cfg: DataGenConfig) -> tuple[Dataset, np.ndarray]:
    """Generate the full dataset in memory (chunked by ``block_rows``)."""
    beta = _true_beta(cfg)
    names = tuple(f"x{j + 1}" for j in range(cfg.k))
    return Dataset(list(iter_chunks(cfg, beta)), names), beta


def stream_dataset(cfg: DataGenConfig) -> tuple[Dataset, np.ndarray]:
    """Like :func:`gen_dataset` but regenerates rows on every pass."""
    beta = _true_beta(cfg)
    names = tuple(f"x{j + 1}" for j in range(cfg.k))
    return Dataset(lambda: iter_chunks(cfg, beta), names), beta
