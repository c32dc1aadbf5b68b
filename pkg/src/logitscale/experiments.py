"""Reproduction harness: solver robustness and inference validation studies.

Every replicate is generated from a seed derived deterministically from the
experiment seed and the replicate index (``derive_seed``), and that seed is
stored with the replicate's record, so any single replicate can be
regenerated in isolation.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .datagen import DataGenConfig, Pcg32, correlation_level, draw_beta, gen_dataset, iter_chunks
from .exceptions import LogitScaleError, OutOfRange, TooManyFailures, ZeroSigma
from .inference import CovKind, build_summary, covariance_mle, normal_sf
from .linalg import cholesky_decompose
from .model import Dataset, evaluate
from .solvers import FitResult, Method, SolverConfig, fit

__all__ = [
    "Series",
    "ExperimentReport",
    "derive_seed",
    "standardized_error",
    "kolmogorov_sf",
    "ks_test_uniform",
    "pvalue_uniformity_experiment",
    "correlation_sweep",
    "bootstrap_covariance",
    "bootstrap_escalation",
    "throughput_benchmark",
]

MASK64 = (1 << 64) - 1


def derive_seed(base: int, *keys: int) -> int:
    """SplitMix64-style hash of ``base`` and integer keys."""
    z = base & MASK64
    for key in keys:
        z = (z + 0x9E3779B97F4A7C15 * (key + 1)) & MASK64
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
    return z


@dataclass
class Series:
    name: str
    x_label: str
    y_label: str
    x: list[float]
    y: list[float]


@dataclass
class ExperimentReport:
    name: str
    parameters: dict[str, Any]
    records: list[dict[str, Any]] = field(default_factory=list)
    aggregates: dict[str, Any] = field(default_factory=dict)
    series: list[Series] = field(default_factory=list)
    table: list[dict[str, Any]] = field(default_factory=list)

    def write(self, out_dir: str | os.PathLike) -> list[str]:
        """Write plot series, records, summary table and a JSON manifest."""
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for s in self.series:
            path = os.path.join(out_dir, f"{s.name}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([s.x_label, s.y_label])
                w.writerows(zip(map(repr, map(float, s.x)), map(repr, map(float, s.y))))
            written.append(path)
        for label, rows in (("records", self.records), ("summary", self.table)):
            if not rows:
                continue
            path = os.path.join(out_dir, f"{label}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
            written.append(path)
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(
                {
                    "experiment": self.name,
                    "parameters": self.parameters,
                    "aggregates": self.aggregates,
                    "replicate_seeds": sorted({r["seed"] for r in self.records if "seed" in r}),
                    "files": [os.path.basename(p) for p in written],
                },
                fh,
                indent=2,
                default=_json_default,
            )
        written.append(path)
        return written


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- primitives ---------------------------------------------------------------


def standardized_error(beta_test, beta_ref, sigma_ref) -> np.ndarray:
    """``(beta_test - beta_ref) / sigma_ref`` elementwise."""
    bt = np.asarray(beta_test, dtype=float)
    br = np.asarray(beta_ref, dtype=float)
    sr = np.asarray(sigma_ref, dtype=float)
    if not (bt.shape == br.shape == sr.shape):
        raise ValueError("all three vectors must have the same length")
    if np.any(sr <= 0):
        raise ZeroSigma("reference standard errors must be positive")
    return (bt - br) / sr


def kolmogorov_sf(lam: float) -> float:
    """``P(K > lam)`` for the limiting Kolmogorov distribution.

    Uses the alternating series for large ``lam`` and the theta-function
    form for small ``lam``, where the alternating series converges slowly.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.18:
        c = -(math.pi**2) / (8.0 * lam * lam)
        total = 0.0
        for j in range(1, 101):
            term = math.exp(c * (2 * j - 1) ** 2)
            total += term
            if term < 1e-17:
                break
        return max(0.0, min(1.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * total))
    total = 0.0
    for j in range(1, 101):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += term if j % 2 else -term
        if term < 1e-17:
            break
    return max(0.0, min(1.0, 2.0 * total))


def ks_test_uniform(samples) -> tuple[float, float]:
    """One-sample KS test against U(0, 1).  Returns ``(D, p_value)``."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if x.size == 0:
        raise ValueError("need at least one sample")
    if not (np.all(np.isfinite(x)) and x[0] >= 0.0 and x[-1] <= 1.0):
        raise OutOfRange("samples must lie in [0, 1]")
    n = x.size
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)


def _fit_or_none(data: Dataset, method: str, **kw) -> tuple[FitResult | None, str]:
    try:
        return fit(data, SolverConfig(method=method, **kw)), ""
    except LogitScaleError as exc:
        return None, f"{type(exc).__name__}: {exc}"


# -- p-value uniformity -----------------------------------------------------


def pvalue_uniformity_experiment(
    replicates: int = 200,
    n: int = 100_000,
    k: int = 10,
    solver: str | Sequence[str] = "lbfgs",
    seed: int = 0,
    bias: float = 0.0,
) -> ExperimentReport:
    """KS test of Wald p-values for a coefficient whose true value is 0.

    Each replicate draws independent standard-normal features and a random
    ``beta`` whose last entry is forced to zero, fits the model with an
    intercept, and records the two-sided p-value of that last coefficient
    (MLE covariance).  ``bias`` shifts the estimate before testing; a
    non-zero shift is a negative control that must break uniformity.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    solvers = [solver] if isinstance(solver, str) else list(solver)
    solvers = [Method(s).value for s in solvers]
    records = []
    for r in range(replicates):
        rseed = derive_seed(seed, r)
        beta = draw_beta(k, rseed, 0)
        beta[-1] = 0.0
        data, _ = gen_dataset(DataGenConfig(n, k, beta=tuple(beta), seed=rseed, stream=1))
        for method in solvers:
            res, err = _fit_or_none(data, method)
            rec = {"replicate": r, "seed": rseed, "solver": method, "estimate": math.nan,
                   "std_error": math.nan, "p_value": math.nan, "converged": False, "error": err}
            if res is not None:
                se = math.sqrt(covariance_mle(res, data).matrix[-1, -1])
                est = res.beta_hat[-1] + bias
                rec.update(estimate=est, std_error=se, p_value=min(1.0, 2.0 * normal_sf(abs(est / se))),
                           converged=res.converged, error=res.failure.value if res.failure else "")
            records.append(rec)

    aggregates: dict[str, Any] = {}
    series = []
    for method in solvers:
        pv = np.array([r["p_value"] for r in records if r["solver"] == method])
        ok = pv[np.isfinite(pv)]
        d, p = ks_test_uniform(ok) if ok.size else (math.nan, math.nan)
        aggregates[method] = {"ks_statistic": d, "ks_p_value": p, "n_pvalues": int(ok.size),
                              "n_failed": int(pv.size - ok.size)}
        srt = np.sort(ok)
        series.append(Series(f"pvalue_ecdf_{method}", "p_value", "ecdf",
                             srt.tolist(), (np.arange(1, srt.size + 1) / srt.size).tolist()))
    return ExperimentReport(
        "pvalue_uniformity",
        {"replicates": replicates, "n": n, "k": k, "solvers": solvers, "seed": seed, "bias": bias,
         "null_coefficient": f"x{k}"},
        records,
        aggregates,
        series,
    )


# -- correlation sweep ------------------------------------------------------


def correlation_sweep(
    levels: Iterable[int] = range(1, 15),
    n: int = 1000,
    replicates: int = 50,
    seed: int = 0,
    solvers: Sequence[str] = ("irls", "lbfgs"),
) -> ExperimentReport:
    """Mean ``||beta_hat - beta||`` versus feature correlation ``1 - 0.1**level``.

    Two correlated features plus an intercept (true intercept 0).  Within
    a replicate the same seed is used at every level, so only the
    correlation changes along the sweep.  Failed fits are recorded with an
    infinite distance; ``mean_distance`` substitutes the largest finite
    distance that solver produced anywhere in the sweep for each failure.
    """
    levels = list(levels)
    if n < 100:
        raise ValueError("n must be >= 100")
    solvers = [Method(s).value for s in solvers]
    records = []
    for level in levels:
        rho = correlation_level(level)
        for r in range(replicates):
            rseed = derive_seed(seed, r)
            beta = draw_beta(2, rseed, 0)
            data, _ = gen_dataset(
                DataGenConfig(n, 2, correlation=rho or None, beta=tuple(beta), seed=rseed, stream=1)
            )
            truth = np.r_[0.0, beta]
            for method in solvers:
                res, err = _fit_or_none(data, method)
                failed = res is None or res.failure is not None
                dist = math.inf if failed else float(np.linalg.norm(res.beta_hat - truth))
                records.append({
                    "level": level, "rho": rho, "replicate": r, "seed": rseed, "solver": method,
                    "distance": dist, "failed": failed,
                    "failure": err if res is None else (res.failure.value if res.failure else ""),
                    "iterations": 0 if res is None else res.iterations,
                })

    worst = {}
    for method in solvers:
        finite = [x["distance"] for x in records if x["solver"] == method and math.isfinite(x["distance"])]
        worst[method] = max(finite) if finite else math.inf

    table = []
    for level in levels:
        for method in solvers:
            rows = [x for x in records if x["level"] == level and x["solver"] == method]
            dists = np.array([x["distance"] for x in rows])
            finite = dists[np.isfinite(dists)]
            penalized = np.where(np.isfinite(dists), dists, worst[method])
            table.append({
                "level": level, "rho": correlation_level(level), "solver": method,
                "mean_distance": float(np.mean(penalized)),
                "mean_distance_finite": float(np.mean(finite)) if finite.size else math.inf,
                "failure_rate": float(np.mean(~np.isfinite(dists))),
                "replicates": len(rows),
            })
    series = [
        Series(f"distance_{m}", "level", "mean_distance",
               [t["level"] for t in table if t["solver"] == m],
               [t["mean_distance"] for t in table if t["solver"] == m])
        for m in solvers
    ] + [
        Series(f"failure_rate_{m}", "level", "failure_rate",
               [t["level"] for t in table if t["solver"] == m],
               [t["failure_rate"] for t in table if t["solver"] == m])
        for m in solvers
    ]
    return ExperimentReport(
        "correlation_sweep",
        {"levels": levels, "n": n, "replicates": replicates, "seed": seed, "solvers": solvers},
        records,
        {"worst_finite_distance": worst},
        series,
        table,
    )


# -- bootstrap ----------------------------------------------------------------


def _bootstrap_draws(data: Dataset, replicates: int, seed: int, method: str = "lbfgs"):
    X, y = data.to_arrays()
    n = y.size
    rng = Pcg32(seed, 0)
    estimates, failures = [], 0
    for _ in range(replicates):
        idx = ((rng.u32_block(n).astype(np.uint64) * np.uint64(n)) >> np.uint64(32)).astype(np.intp)
        sample = Dataset.from_arrays(X[idx], y[idx], data.column_names, chunk_size=max(n, 1))
        res, _ = _fit_or_none(sample, method)
        if res is None or not res.converged:
            failures += 1
            continue
        estimates.append(res.beta_hat)
    return np.array(estimates), failures


def bootstrap_covariance(
    data: Dataset,
    replicates: int = 1000,
    seed: int = 0,
    method: str = "lbfgs",
    return_failures: bool = False,
):
    """Empirical covariance of ``beta_hat`` over row resamples.

    The full-data information matrix is factored first, so a design that
    cannot identify its coefficients (e.g. a constant column next to the
    intercept) raises ``NotPositiveDefinite`` instead of yielding a
    meaningless variance.
    """
    if replicates < 50:
        raise ValueError("replicates must be >= 50")
    base = fit(data, SolverConfig(method=method))
    cholesky_decompose(evaluate(base.model, data).hessian)
    est, failures = _bootstrap_draws(data, replicates, seed, method)
    if failures > 0.05 * replicates:
        raise TooManyFailures(f"{failures} of {replicates} bootstrap fits failed")
    cov = np.cov(est, rowvar=False, ddof=1).reshape(base.k, base.k)
    return (cov, failures) if return_failures else cov


def bootstrap_escalation(
    data: Dataset,
    counts: Sequence[int] = (100, 1000, 10000),
    seed: int = 0,
    method: str = "lbfgs",
) -> ExperimentReport:
    """Bootstrap covariance at increasing replicate counts against both analytic estimates."""
    base = fit(data, SolverConfig(method=method))
    analytic = {
        "mle": build_summary(base, data, CovKind.MLE).covariance,
        "sandwich": build_summary(base, data, CovKind.SANDWICH).covariance,
    }
    records, table = [], []
    for count in counts:
        rseed = derive_seed(seed, count)
        cov, failures = bootstrap_covariance(data, count, rseed, method, return_failures=True)
        row = {"replicates": count, "seed": rseed, "failures": failures}
        for name, ref in analytic.items():
            row[f"frobenius_to_{name}"] = float(np.linalg.norm(cov - ref))
            row[f"max_rel_diag_to_{name}"] = float(np.max(np.abs(np.diag(cov) / np.diag(ref) - 1)))
        for j, v in enumerate(np.diag(cov)):
            row[f"var_{j}"] = float(v)
        records.append(row)
        table.append(row)
    series = [
        Series(f"frobenius_to_{name}", "replicates", "frobenius_distance",
               list(counts), [r[f"frobenius_to_{name}"] for r in records])
        for name in analytic
    ]
    return ExperimentReport(
        "bootstrap",
        {"counts": list(counts), "seed": seed, "method": method, "n": data.n_rows, "k": base.k},
        records,
        {name: np.diag(m).tolist() for name, m in analytic.items()},
        series,
        table,
    )


# -- throughput ---------------------------------------------------------------


def throughput_benchmark(
    sizes: Sequence[int] = (100_000, 200_000, 400_000, 800_000, 1_600_000),
    k: int = 10,
    seed: int = 0,
    method: str = "lbfgs",
    cov_kind: str = "sandwich",
    repeats: int = 3,
    clock: Callable[[], float] = time.perf_counter,
) -> ExperimentReport:
    """Rows per second for fit + full summary at increasing row counts.

    Rows are generated block by block into a chunk list (never one dense
    matrix); generation is not timed.  All sizes share one seed, hence one
    true ``beta``, so only the row count changes between sizes.  With
    ``repeats > 1`` the fastest run is kept.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    records = []
    rseed = derive_seed(seed, 0)
    for n in sizes:
        cfg = DataGenConfig(n, k, seed=rseed, stream=1)
        rec: dict[str, Any] = {"n": n, "seed": rseed, "error": ""}
        try:
            data = Dataset(list(iter_chunks(cfg)), tuple(f"x{j + 1}" for j in range(k)))
            best = None
            for _ in range(repeats):
                t0 = clock()
                res = fit(data, SolverConfig(method=method))
                t1 = clock()
                build_summary(res, data, cov_kind)
                t2 = clock()
                if best is None or t2 - t0 < best[0] + best[1]:
                    best = (t1 - t0, t2 - t1, res.iterations)
            fit_s, summ_s, iters = best
            rec.update(fit_seconds=fit_s, summary_seconds=summ_s, total_seconds=fit_s + summ_s,
                       iterations=iters, throughput=n / (fit_s + summ_s))
        except LogitScaleError as exc:
            rec.update(fit_seconds=math.nan, summary_seconds=math.nan, total_seconds=math.nan,
                       iterations=0, throughput=math.nan, error=str(exc))
        records.append(rec)
    return ExperimentReport(
        "throughput",
        {"sizes": sizes, "k": k, "seed": seed, "method": method, "cov_kind": cov_kind, "repeats": repeats},
        records,
        {},
        [Series("throughput", "rows", "rows_per_second",
                [r["n"] for r in records], [r["throughput"] for r in records])],
        records,
    )
