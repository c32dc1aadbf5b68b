import csv
import itertools
import json
import math
import os

import numpy as np
import pytest
from scipy import stats

from logitscale.datagen import DataGenConfig, gen_dataset
from logitscale.exceptions import NotPositiveDefinite, OutOfRange, ZeroSigma
from logitscale.experiments import (
    bootstrap_covariance,
    bootstrap_escalation,
    correlation_sweep,
    derive_seed,
    kolmogorov_sf,
    ks_test_uniform,
    pvalue_uniformity_experiment,
    standardized_error,
    throughput_benchmark,
)
from logitscale.inference import covariance_sandwich
from logitscale.model import Dataset
from logitscale.solvers import fit


@pytest.mark.parametrize("lam", [0.2, 0.5, 0.8, 1.0, 1.17, 1.19, 1.5, 2.0, 3.0])
def test_kolmogorov_sf_matches_scipy(lam):
    assert kolmogorov_sf(lam) == pytest.approx(stats.kstwobign.sf(lam), rel=1e-10, abs=1e-15)


def test_ks_statistic_is_exact_and_p_value_asymptotic(rng):
    x = rng.random(500)
    d, p = ks_test_uniform(x)
    ref = stats.kstest(x, "uniform")
    assert d == pytest.approx(ref.statistic, abs=1e-15)
    assert p == pytest.approx(stats.kstwobign.sf(math.sqrt(500) * d), rel=1e-10)
    # the asymptotic value is close to scipy's exact one at this size
    assert p == pytest.approx(ref.pvalue, abs=0.02)


def test_ks_detects_non_uniform(rng):
    assert ks_test_uniform(rng.random(1000) ** 2)[1] < 1e-6
    assert ks_test_uniform(np.linspace(0.0005, 0.9995, 1000))[1] > 0.99
    with pytest.raises(OutOfRange):
        ks_test_uniform([0.5, 1.5])


def test_standardized_error():
    np.testing.assert_allclose(standardized_error([1.0, 2.0], [0.5, 2.5], [0.5, 0.25]), [1.0, -2.0])
    with pytest.raises(ZeroSigma):
        standardized_error([1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        standardized_error([1.0], [1.0, 2.0], [1.0, 1.0])


def test_derive_seed_is_deterministic_and_spread():
    seeds = [derive_seed(0, r) for r in range(1000)]
    assert seeds == [derive_seed(0, r) for r in range(1000)]
    assert len(set(seeds)) == 1000
    assert derive_seed(1, 0) != derive_seed(0, 0)
    assert all(0 <= s < 2**64 for s in seeds)


def test_pvalue_experiment_small_run():
    rep = pvalue_uniformity_experiment(replicates=30, n=2000, k=3, solver=["irls", "lbfgs"], seed=4)
    assert len(rep.records) == 60
    for method in ("irls", "lbfgs"):
        agg = rep.aggregates[method]
        assert agg["n_pvalues"] == 30 and agg["n_failed"] == 0
        assert 0.0 <= agg["ks_p_value"] <= 1.0
    pv = {m: [r["p_value"] for r in rep.records if r["solver"] == m] for m in ("irls", "lbfgs")}
    np.testing.assert_allclose(pv["irls"], pv["lbfgs"], rtol=1e-5)


def test_correlation_sweep_structure_and_failure_accounting():
    rep = correlation_sweep(levels=[1, 13, 14], n=300, replicates=4, seed=2)
    assert len(rep.table) == 6
    assert {(t["level"], t["solver"]) for t in rep.table} == set(itertools.product([1, 13, 14], ["irls", "lbfgs"]))
    worst = rep.aggregates["worst_finite_distance"]["irls"]
    for t in rep.table:
        rows = [r for r in rep.records if r["level"] == t["level"] and r["solver"] == t["solver"]]
        d = np.array([r["distance"] for r in rows])
        filled = np.where(np.isfinite(d), d, rep.aggregates["worst_finite_distance"][t["solver"]])
        assert t["mean_distance"] == pytest.approx(filled.mean())
        assert t["failure_rate"] == pytest.approx(np.mean(~np.isfinite(d)))
    assert math.isfinite(worst)
    # the same seed is used at every level
    seeds = {lvl: [r["seed"] for r in rep.records if r["level"] == lvl and r["solver"] == "irls"] for lvl in (1, 13)}
    assert seeds[1] == seeds[13]


def test_bootstrap_close_to_sandwich_small():
    data, _ = gen_dataset(DataGenConfig(400, 2, seed=12, stream=0))
    res = fit(data)
    V = covariance_sandwich(res, data).matrix
    B = bootstrap_covariance(data, replicates=400, seed=1)
    np.testing.assert_allclose(np.diag(B), np.diag(V), rtol=0.3)
    assert np.array_equal(B, bootstrap_covariance(data, replicates=400, seed=1))


def test_bootstrap_rejects_unidentified_design(rng):
    X = np.column_stack([rng.standard_normal(100), np.ones(100)])
    y = (rng.random(100) < 0.5).astype(float)
    with pytest.raises(NotPositiveDefinite):
        bootstrap_covariance(Dataset.from_arrays(X, y), replicates=50)
    with pytest.raises(ValueError):
        bootstrap_covariance(Dataset.from_arrays(X[:, :1], y), replicates=10)


def test_report_files(tmp_path):
    data, _ = gen_dataset(DataGenConfig(300, 2, seed=3))
    rep = bootstrap_escalation(data, counts=(50, 60), seed=0)
    paths = rep.write(tmp_path)
    names = {os.path.basename(p) for p in paths}
    assert {"manifest.json", "records.csv", "summary.csv"} <= names
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["experiment"] == "bootstrap"
    assert set(manifest["files"]) == names - {"manifest.json"}
    with open(tmp_path / "records.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["replicates"]) for r in rows] == [50, 60]


def test_throughput_with_fake_clock():
    ticks = itertools.count()
    rep = throughput_benchmark(sizes=(1000, 2000), k=3, repeats=1, clock=lambda: float(next(ticks)))
    assert [r["n"] for r in rep.records] == [1000, 2000]
    for r in rep.records:
        assert r["fit_seconds"] == 1.0 and r["summary_seconds"] == 1.0
        assert r["throughput"] == r["n"] / 2.0
    with pytest.raises(ValueError):
        throughput_benchmark(sizes=(2000, 1000))
