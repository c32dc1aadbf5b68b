import math

import numpy as np
import pytest
from conftest import logistic_sample

from logitscale.exceptions import DimensionMismatch, EmptyDataset
from logitscale.model import (
    Dataset,
    LogisticModel,
    RowChunk,
    evaluate,
    gradient,
    hessian,
    log_likelihood,
    sigmoid,
)


def test_sigmoid_is_stable_at_the_tails():
    t = np.array([-800.0, -40.0, 0.0, 40.0, 800.0])
    s = sigmoid(t)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5
    assert s[0] == 0.0 and s[-1] == 1.0


def test_intercept_only_log_likelihood_at_zero():
    data = Dataset.from_arrays(np.zeros((4, 0)), [0, 1, 0, 1])
    model = LogisticModel([0.0])
    assert math.isclose(log_likelihood(model, data), 4 * math.log(0.5), rel_tol=1e-15)


def test_log_likelihood_finite_under_separation():
    X = np.array([[-1.0], [1.0]])
    data = Dataset.from_arrays(X, [0, 1])
    ll = log_likelihood(LogisticModel([0.0, 1e4]), data)
    assert np.isfinite(ll) and ll <= 0.0
    # a wrongly signed huge coefficient is clamped at log(1e-15) per row
    worst = log_likelihood(LogisticModel([0.0, -1e4]), data)
    assert math.isclose(worst, 2 * math.log(1e-15), rel_tol=1e-12)


def test_gradient_matches_finite_differences(rng):
    X, y, _ = logistic_sample(rng, 300, 3)
    data = Dataset.from_arrays(X, y, chunk_size=64)
    beta = np.array([0.2, -0.3, 0.5, 0.1])
    g = gradient(LogisticModel(beta), data)
    eps = 1e-6
    fd = np.array([
        (log_likelihood(LogisticModel(beta + eps * e), data)
         - log_likelihood(LogisticModel(beta - eps * e), data)) / (2 * eps)
        for e in np.eye(4)
    ])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)


def test_hessian_is_negative_jacobian_of_gradient(rng):
    X, y, _ = logistic_sample(rng, 200, 2)
    data = Dataset.from_arrays(X, y, chunk_size=50)
    beta = np.array([0.1, 0.4, -0.2])
    H = hessian(LogisticModel(beta), data)
    eps = 1e-6
    J = np.column_stack([
        (gradient(LogisticModel(beta + eps * e), data) - gradient(LogisticModel(beta - eps * e), data)) / (2 * eps)
        for e in np.eye(3)
    ])
    np.testing.assert_allclose(H, -J, rtol=1e-5, atol=1e-5)
    assert np.all(np.linalg.eigvalsh(H) > 0)


def test_fused_pass_equals_separate_quantities(rng):
    X, y, _ = logistic_sample(rng, 500, 4)
    data = Dataset.from_arrays(X, y, chunk_size=77)
    m = LogisticModel(rng.standard_normal(5) * 0.3)
    ev = evaluate(m, data)
    assert math.isclose(ev.log_likelihood, log_likelihood(m, data), rel_tol=1e-13)
    assert ev.n == 500
    assert ev.hessian_acc.count == 500


def test_chunking_does_not_change_results(rng):
    X, y, _ = logistic_sample(rng, 257, 3)
    m = LogisticModel([0.1, -0.2, 0.3, 0.05])
    ref = evaluate(m, Dataset.from_arrays(X, y, chunk_size=257))
    for cs in (1, 17, 100):
        ev = evaluate(m, Dataset.from_arrays(X, y, chunk_size=cs))
        assert math.isclose(ev.log_likelihood, ref.log_likelihood, rel_tol=1e-12)
        np.testing.assert_allclose(ev.gradient, ref.gradient, rtol=1e-11, atol=1e-11)
        np.testing.assert_allclose(ev.hessian, ref.hessian, rtol=1e-11)


def test_threaded_map_agrees_with_serial(rng):
    X, y, _ = logistic_sample(rng, 2000, 5)
    data = Dataset.from_arrays(X, y, chunk_size=128)
    m = LogisticModel(rng.standard_normal(6) * 0.2)
    a, b = evaluate(m, data), evaluate(m, data, n_jobs=4)
    assert a.log_likelihood == b.log_likelihood
    np.testing.assert_array_equal(a.gradient, b.gradient)


def test_no_intercept_model(rng):
    X, y, _ = logistic_sample(rng, 100, 2)
    data = Dataset.from_arrays(X, y)
    m = LogisticModel([0.3, -0.1], has_intercept=False)
    p = 1 / (1 + np.exp(-(X @ m.beta)))
    np.testing.assert_allclose(gradient(m, data), X.T @ (y - p), rtol=1e-12)


def test_streamed_dataset_rereads_source(rng):
    X, y, _ = logistic_sample(rng, 90, 2)
    calls = []

    def factory():
        calls.append(1)
        return iter([RowChunk(y[i:i + 30], X[i:i + 30]) for i in range(0, 90, 30)])

    data = Dataset(factory)
    assert data.streamed and data.n_rows == 90
    evaluate(LogisticModel([0.0, 0.0, 0.0]), data)
    assert len(calls) == 2
    mem = data.materialize()
    assert not mem.streamed and mem.n_rows == 90


def test_validation_errors():
    with pytest.raises(ValueError):
        RowChunk([0, 2], np.zeros((2, 1)))
    with pytest.raises(DimensionMismatch):
        RowChunk([0, 1], np.zeros((3, 1)))
    with pytest.raises(DimensionMismatch):
        evaluate(LogisticModel([0.0, 1.0, 2.0]), Dataset.from_arrays(np.zeros((2, 1)), [0, 1]))
    with pytest.raises(EmptyDataset):
        evaluate(LogisticModel([0.0]), Dataset([]))
    with pytest.raises(ValueError):
        LogisticModel([np.nan])
