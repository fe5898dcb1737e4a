import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairshift.data import DataError, Dataset
from fairshift.logistic import (ModelWeights, TrainConfig, bce_gradient, bce_loss, classify,
                                predict_proba, sigmoid, train_performance_model)

from conftest import make_dataset


def numeric_gradient(w, X, Y, l2, h=1e-6):
    params = np.r_[w.coefficients, w.intercept]
    g = np.empty_like(params)
    for k in range(len(params)):
        up, dn = params.copy(), params.copy()
        up[k] += h
        dn[k] -= h
        f_up = bce_loss(ModelWeights(up[:-1], up[-1], w.feature_names), X, Y, l2)
        f_dn = bce_loss(ModelWeights(dn[:-1], dn[-1], w.feature_names), X, Y, l2)
        g[k] = (f_up - f_dn) / (2 * h)
    return g


class TestSigmoid:
    def test_extremes_are_finite(self):
        s = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_array_equal(s, [0.0, 0.5, 1.0])

    @given(st.floats(-700, 700))
    def test_symmetry(self, t):
        assert sigmoid(t) + sigmoid(-t) == pytest.approx(1.0, abs=1e-15)


class TestLoss:
    def test_single_row_value(self):
        # p = sigmoid(ln 9) = 0.9 for a positive row
        w = ModelWeights([0.0], np.log(9.0), ("a",))
        assert bce_loss(w, np.zeros((1, 1)), [1]) == pytest.approx(0.105361, abs=1e-6)

    def test_saturated_probability_is_clamped(self):
        w = ModelWeights([1000.0], 0.0, ("a",))
        loss = bce_loss(w, np.array([[1.0]]), [0])
        assert np.isfinite(loss) and loss == pytest.approx(-np.log(1e-12), rel=1e-6)

    @pytest.mark.parametrize("seed", range(100))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, m = rng.integers(1, 30), rng.integers(1, 6)
        X = rng.normal(size=(n, m))
        Y = rng.integers(0, 2, n)
        w = ModelWeights(rng.normal(size=m), rng.normal(), tuple(f"x{j}" for j in range(m)))
        l2 = float(rng.choice([0.0, 1e-4, 0.5]))
        g_theta, g_b = bce_gradient(w, X, Y, l2)
        np.testing.assert_allclose(np.r_[g_theta, g_b], numeric_gradient(w, X, Y, l2),
                                   rtol=1e-5, atol=1e-6)

    @given(st.integers(0, 10**6), st.floats(0, 1))
    @settings(max_examples=100, deadline=None)
    def test_convex_along_segments(self, seed, a):
        rng = np.random.default_rng(seed)
        X, Y = rng.normal(size=(20, 3)), rng.integers(0, 2, 20)
        p, q = rng.normal(size=4) * 3, rng.normal(size=4) * 3
        f = lambda v: bce_loss(ModelWeights(v[:3], v[3], ("a", "b", "c")), X, Y, 1e-4)
        assert f(a * p + (1 - a) * q) <= a * f(p) + (1 - a) * f(q) + 1e-9

    def test_dimension_mismatch(self):
        w = ModelWeights([1.0, 2.0], 0.0, ("a", "b"))
        with pytest.raises(ValueError):
            predict_proba(w, np.zeros((3, 3)))


class TestTraining:
    def test_recovers_true_parameters(self):
        rng = np.random.default_rng(11)
        theta, b = np.array([1.0, -0.5, 0.25]), -0.3
        X = rng.normal(size=(5000, 3))
        y = (rng.random(5000) < sigmoid(X @ theta + b)).astype(int)
        w = train_performance_model(Dataset(X, y, np.zeros(5000), ("a", "b", "c")))
        assert w.meta["converged"]
        assert np.max(np.abs(np.r_[w.coefficients, w.intercept] - np.r_[theta, b])) < 0.1

    def test_loss_decreases(self, small):
        w = train_performance_model(small)
        assert w.meta["final_loss"] < w.meta["initial_loss"]

    def test_row_order_invariance(self, small):
        perm = np.random.default_rng(3).permutation(small.n)
        a = train_performance_model(small)
        b = train_performance_model(small.take(perm))
        np.testing.assert_allclose(b.coefficients, a.coefficients, atol=1e-8)
        assert b.intercept == pytest.approx(a.intercept, abs=1e-8)

    def test_deterministic(self, small):
        a, b = train_performance_model(small), train_performance_model(small)
        np.testing.assert_array_equal(a.coefficients, b.coefficients)
        assert a.meta == b.meta

    def test_single_class_rejected(self):
        d = Dataset(np.ones((3, 1)), [1, 1, 1], [0, 1, 0], ("a",))
        with pytest.raises(DataError):
            train_performance_model(d)

    def test_explicit_learning_rate(self, small):
        w = train_performance_model(small, TrainConfig(learning_rate=1e-3, max_epochs=50000))
        ref = train_performance_model(small)
        np.testing.assert_allclose(w.coefficients, ref.coefficients, atol=1e-5)


class TestModelWeights:
    def test_json_round_trip(self, small):
        w = train_performance_model(small).with_threshold(0.4)
        back = ModelWeights.from_dict(json.loads(w.to_json()))
        np.testing.assert_array_equal(back.coefficients, w.coefficients)
        assert back.threshold == 0.4 and back.meta == w.meta

    def test_threshold_range(self):
        with pytest.raises(ValueError):
            ModelWeights([1.0], 0.0, ("a",), threshold=1.5)

    def test_classify_needs_threshold(self):
        with pytest.raises(ValueError):
            classify(ModelWeights([1.0], 0.0, ("a",)), np.zeros((1, 1)))

    def test_classify_ties_positive(self):
        w = ModelWeights([0.0], 0.0, ("a",), threshold=0.5)
        np.testing.assert_array_equal(classify(w, np.zeros((2, 1))), [1, 1])
