import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairshift.roc import RocCurve, auc, er_point, er_threshold, roc_auc, roc_curve

from oracles import mann_whitney


def brute_force_points(p, y):
    """(fpr, tpr) for every threshold in {inf} U scores, rule p >= t."""
    pts = set()
    for t in [np.inf, *np.unique(p)]:
        pred = p >= t
        pts.add((np.sum(pred & (y == 0)) / np.sum(y == 0), np.sum(pred & (y == 1)) / np.sum(y == 1)))
    return pts


class TestRocCurve:
    def test_hand_enumeration(self):
        c = roc_curve([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        np.testing.assert_allclose(c.fpr, [0, 0, 0.5, 0.5, 1])
        np.testing.assert_allclose(c.tpr, [0, 0.5, 0.5, 1, 1])
        np.testing.assert_array_equal(c.thresholds, [np.inf, 0.9, 0.8, 0.7, 0.6])
        assert auc(c) == pytest.approx(0.75, abs=1e-15)

    def test_ties_collapse(self):
        c = roc_curve([0.5, 0.5, 0.5], [1, 0, 1])
        assert len(c) == 2
        assert auc(c) == 0.5

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc_curve([0.1, 0.2], [1, 1])

    @pytest.mark.parametrize("n", range(2, 7))
    def test_exhaustive_small(self, n):
        grid = [0.1, 0.5, 0.9]
        for y in itertools.product((0, 1), repeat=n):
            y = np.array(y)
            if y.min() == y.max():
                continue
            for p in itertools.product(grid, repeat=n):
                p = np.array(p)
                c = roc_curve(p, y)
                assert abs(auc(c) - mann_whitney(p, y)) < 1e-12
                assert set(zip(c.fpr.tolist(), c.tpr.tolist())) == brute_force_points(p, y)

    @given(st.integers(2, 50), st.integers(0, 10**6))
    @settings(max_examples=300, deadline=None)
    def test_auc_equals_mann_whitney(self, n, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        p = np.round(rng.random(n), int(rng.integers(1, 4)))
        assert abs(roc_auc(p, y) - mann_whitney(p, y)) < 1e-12

    @given(st.integers(2, 40), st.integers(0, 10**6))
    @settings(max_examples=100, deadline=None)
    def test_monotone_and_anchored(self, n, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        c = roc_curve(rng.random(n), y)
        assert (c.fpr[0], c.tpr[0]) == (0.0, 0.0) and (c.fpr[-1], c.tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)


class TestErThreshold:
    def test_distance(self):
        c = RocCurve(np.array([0.0, 0.2, 1.0]), np.array([0.0, 0.8, 1.0]),
                     np.array([np.inf, 0.4, 0.1]))
        assert er_point(c) == 1 and er_threshold(c) == 0.4
        d = np.hypot(c.fpr[1], 1 - c.tpr[1])
        assert d == pytest.approx(np.sqrt(0.08), abs=1e-15)

    def test_tie_prefers_higher_tpr(self):
        # (0.1, 0.7) and (0.3, 0.9) are both sqrt(0.1) from (0, 1)
        c = RocCurve(np.array([0.0, 0.1, 0.3, 1.0]), np.array([0.0, 0.7, 0.9, 1.0]),
                     np.array([np.inf, 0.6, 0.4, 0.1]))
        assert er_point(c) == 2

    def test_perfect_classifier(self):
        assert er_threshold(roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 0.8
