import numpy as np
import pytest

from fairshift.data import standardize
from fairshift.importance import (fairness_importance, linear_shap, permute_column,
                                  predictive_importance, repetition_rng, thread_count)
from fairshift.logistic import ModelWeights, margin

from oracles import permutation_importance_reference, fisher_yates as reference_shuffle


FOUR = dict(
    X=np.array([[0.2, 1.0], [1.5, -0.3], [-0.7, 0.4], [0.9, -1.2]]),
    Y=np.array([1, 1, 0, 0]),
    Z=np.array([1, 0, 1, 0]),
)
LG = ModelWeights([2.0, 0.0], 0.0, ("a", "b"), 0.5)
FAIR = ModelWeights([0.5, 1.0], 0.1, ("a", "b"), 0.5)


class TestPermute:
    def test_constant_column_unchanged(self):
        X = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        out = permute_column(X, 0, np.random.default_rng(0))
        np.testing.assert_array_equal(out, X)

    def test_matches_reference(self):
        X = np.arange(40.0).reshape(20, 2)
        out = permute_column(X, 1, repetition_rng(9, 1, 3))
        np.testing.assert_array_equal(out[:, 1], reference_shuffle(X[:, 1], repetition_rng(9, 1, 3)))
        np.testing.assert_array_equal(out[:, 0], X[:, 0])

    def test_is_permutation_and_copy(self):
        X = np.random.default_rng(1).normal(size=(50, 3))
        out = permute_column(X, 2, np.random.default_rng(5))
        np.testing.assert_array_equal(np.sort(out[:, 2]), np.sort(X[:, 2]))
        assert out is not X

    def test_single_row(self):
        X = np.array([[1.0, 2.0]])
        np.testing.assert_array_equal(permute_column(X, 0, np.random.default_rng(0)), X)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            permute_column(np.zeros((3, 2)), 2, np.random.default_rng(0))


class TestFairnessImportance:
    def test_matches_from_scratch_version(self):
        rep = fairness_importance(FOUR["X"], FOUR["Y"], FOUR["Z"], LG, FAIR, repetitions=2,
                                  master_seed=13, threads=1)
        ref = permutation_importance_reference(FOUR["X"], FOUR["Y"], FOUR["Z"], LG, FAIR, 2, 13)
        np.testing.assert_array_equal(rep.delta_samples, ref)
        np.testing.assert_array_equal(rep.delta_mean, ref.mean(axis=1))

    def test_dead_feature_equals_baseline(self):
        # neither model reads column b
        fair = ModelWeights([0.5, 0.0], -0.2, ("a", "b"), 0.5)
        rep = fairness_importance(FOUR["X"], FOUR["Y"], FOUR["Z"], LG, fair, 7, 0)
        assert rep.baseline == 1.0
        assert np.all(rep.delta_samples[1] == rep.baseline)

    def test_thread_count_does_not_matter(self, biased_cohort):
        d = standardize(biased_cohort.take(np.arange(600)))[0]
        lg = ModelWeights(np.linspace(-1, 1, d.m), -0.5, d.feature_names, 0.4)
        fair = ModelWeights(np.linspace(1, -1, d.m) * 0.3, -0.5, d.feature_names, 0.4)
        a = fairness_importance(d.features, d.labels, d.group, lg, fair, 5, 3, threads=1)
        b = fairness_importance(d.features, d.labels, d.group, lg, fair, 5, 3, threads=4)
        np.testing.assert_array_equal(a.delta_samples, b.delta_samples)

    def test_duplicate_features_tie(self):
        rng = np.random.default_rng(2)
        n = 400
        x = rng.normal(size=n)
        X = np.column_stack([x, x, rng.normal(size=n)])
        Z = (rng.random(n) < 0.5).astype(int)
        Y = (rng.random(n) < 1 / (1 + np.exp(-x))).astype(int)
        names = ("a", "a_copy", "c")
        lg = ModelWeights([1.0, 1.0, 0.0], 0.0, names, 0.5)
        fair = ModelWeights([0.2, 0.2, 0.5], 0.0, names, 0.5)
        rep = fairness_importance(X, Y, Z, lg, fair, repetitions=500, master_seed=1)
        se = rep.delta_std / np.sqrt(500)
        assert abs(rep.delta_mean[0] - rep.delta_mean[1]) < 4 * np.hypot(se[0], se[1])

    def test_degenerate_single_row(self):
        rep = fairness_importance(np.array([[1.0, 2.0]]), [1], [0], LG, FAIR, 3, 0)
        np.testing.assert_array_equal(rep.delta_samples, rep.baseline)

    def test_report_shapes(self):
        rep = fairness_importance(FOUR["X"], FOUR["Y"], FOUR["Z"], LG, FAIR, 4, 0)
        assert rep.delta_samples.shape == (2, 4)
        assert sorted(rep.rank.tolist()) == [1, 2]
        assert rep.top() in ("a", "b")

    def test_csv(self, tmp_path):
        rep = fairness_importance(FOUR["X"], FOUR["Y"], FOUR["Z"], LG, FAIR, 3, 0)
        rep.to_csv(tmp_path / "imp.csv")
        lines = (tmp_path / "imp.csv").read_text().splitlines()
        assert lines[0] == "feature,delta_mean,delta_std,rank"
        assert len(lines) == 3

    def test_thread_env(self, monkeypatch):
        monkeypatch.setenv("FAIRSHIFT_THREADS", "3")
        assert thread_count() == 3
        assert thread_count(2) == 2


class TestPredictiveImportance:
    def test_informative_feature_first(self, small):
        w = ModelWeights([3.0, 0.0, 0.0], 0.0, small.feature_names, 0.5)
        rep = predictive_importance(small.features, small.labels, w, "auc", 20, 0)
        assert rep.top() == "x0"
        np.testing.assert_array_equal(rep.delta_samples[1:], 0.0)

    def test_bad_metric(self, small):
        w = ModelWeights([1.0, 0.0, 0.0], 0.0, small.feature_names, 0.5)
        with pytest.raises(ValueError):
            predictive_importance(small.features, small.labels, w, "f1")


class TestLinearShap:
    def test_hand_example(self):
        w = ModelWeights([2.0], 0.0, ("a",))
        r = linear_shap(w, np.array([[3.0]]), np.array([[0.0], [2.0]]))
        assert r.values[0, 0] == 4.0 and r.base_value == 2.0

    def test_additivity(self, small):
        w = ModelWeights([0.7, -1.3, 0.2], 0.4, small.feature_names)
        r = linear_shap(w, small.features, small.features[:50])
        np.testing.assert_allclose(r.base_value + r.values.sum(axis=1),
                                   margin(w, small.features), atol=1e-10)

    def test_standardization_invariance(self, small):
        # the same decision function expressed on raw and standardized inputs
        std, p = standardize(small)
        w_std = ModelWeights([0.7, -1.3, 0.2], 0.4, small.feature_names)
        theta_raw = w_std.coefficients / p.stddevs
        b_raw = w_std.intercept - theta_raw @ p.means
        w_raw = ModelWeights(theta_raw, b_raw, small.feature_names)
        a = linear_shap(w_std, std.features, std.features)
        b = linear_shap(w_raw, small.features, small.features)
        np.testing.assert_allclose(a.values, b.values, atol=1e-10)
        assert a.base_value == pytest.approx(b.base_value, abs=1e-10)

    def test_zero_coefficient_gets_zero(self, small):
        w = ModelWeights([1.0, 0.0, 2.0], 0.0, small.feature_names)
        r = linear_shap(w, small.features, small.features)
        np.testing.assert_array_equal(r.values[:, 1], 0.0)
        assert r.rank[1] == 3

    def test_shape_mismatch(self, small):
        w = ModelWeights([1.0, 0.0, 2.0], 0.0, small.feature_names)
        with pytest.raises(ValueError):
            linear_shap(w, small.features, small.features[:, :2])
