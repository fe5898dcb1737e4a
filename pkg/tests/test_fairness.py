import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairshift.fairness import DegenerateCellError, eod_squared, fairness_improvement, group_rates
from fairshift.logistic import ModelWeights


def preds_with_rates(tpr1, fpr1, tpr0, fpr0, n=1000):
    """Y, Z, preds realizing the four rates exactly on n rows per cell."""
    Y, Z, P = [], [], []
    for y, z, rate in ((1, 1, tpr1), (0, 1, fpr1), (1, 0, tpr0), (0, 0, fpr0)):
        k = int(round(rate * n))
        Y += [y] * n
        Z += [z] * n
        P += [1] * k + [0] * (n - k)
    return np.array(P), np.array(Y), np.array(Z)


class TestEod:
    def test_hand_example(self):
        m = eod_squared([1, 0, 0, 0], [1, 1, 0, 0], [1, 0, 1, 0])
        assert m.eod_sq == 1.0 and m.tpr_diff_sq == 1.0 and m.fpr_diff_sq == 0.0
        assert m.overall_tpr == 0.5

    def test_reported_convention(self):
        P, Y, Z = preds_with_rates(0.571, 0.264, 0.5, 0.2)
        m = eod_squared(P, Y, Z)
        assert m.tpr_diff_abs == pytest.approx(0.071, abs=1e-12)
        assert m.fpr_diff_abs == pytest.approx(0.064, abs=1e-12)
        assert m.eod_reported == pytest.approx(0.0675, abs=1e-12)
        assert m.eod_sq == pytest.approx(0.071 ** 2 + 0.064 ** 2, abs=1e-12)
        assert m.eod_sq == pytest.approx(0.009137, abs=1e-6)

    def test_degenerate_cell(self):
        with pytest.raises(DegenerateCellError, match="Y=0,Z=0"):
            group_rates([1, 0, 1], [1, 1, 0], [1, 0, 1])

    def test_non_strict_counts_undefined_gap_as_zero(self):
        m = eod_squared([1, 0, 1], [1, 1, 0], [1, 0, 1], strict=False)
        assert np.isnan(m.rates.fpr_g0)
        assert m.fpr_diff_sq == 0.0 and m.eod_sq == 1.0

    @given(st.integers(4, 200), st.integers(0, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_group_swap_symmetry_and_bounds(self, n, seed):
        rng = np.random.default_rng(seed)
        Y, Z, P = rng.integers(0, 2, (3, n))
        Y[:4], Z[:4] = [1, 1, 0, 0], [1, 0, 1, 0]
        a = eod_squared(P, Y, Z)
        b = eod_squared(P, Y, 1 - Z)
        assert a.eod_sq == b.eod_sq and a.eod_reported == b.eod_reported
        assert 0.0 <= a.eod_sq <= 2.0
        # constant predictions are perfectly fair
        assert eod_squared(np.ones(n), Y, Z).eod_sq == 0.0


class TestFairnessImprovement:
    def test_identical_models(self, small):
        w = ModelWeights([1.0, 0.0, 0.0], 0.0, small.feature_names, 0.5)
        assert fairness_improvement(small.features, small.labels, small.group, w, w) == 0.0

    def test_sign(self):
        X = np.array([[1.0], [0.0], [0.0], [0.0]])
        Y, Z = np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0])
        lg = ModelWeights([10.0], -5.0, ("a",), 0.5)   # [1, 0, 0, 0] -> eod 1
        fair = ModelWeights([0.0], 5.0, ("a",), 0.5)   # all positive -> eod 0
        assert fairness_improvement(X, Y, Z, lg, fair) == -1.0
