"""ROC curves, trapezoidal AUC and the closest-to-(0,1) operating point."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["RocCurve", "roc_curve", "auc", "er_threshold", "er_point", "roc_auc"]

# distances closer than this count as ties
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points ordered from (0, 0) to (1, 1).

    ``thresholds[k]`` is the cut that realizes point k under the rule
    "positive iff p >= threshold"; the (0, 0) point uses +inf.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def __len__(self):
        return len(self.fpr)

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["fpr", "tpr", "threshold"])
            for row in self.points():
                w.writerow([repr(v) for v in row])


def roc_curve(probs, Y) -> RocCurve:
    """One ROC point per distinct score, plus the (0, 0) origin."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(Y)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-p, kind="stable")
    p_sorted, y_sorted = p[order], y[order]
    tp = np.cumsum(y_sorted == 1)
    fp = np.cumsum(y_sorted == 0)
    # last position of each run of tied scores
    last = np.flatnonzero(np.r_[p_sorted[1:] != p_sorted[:-1], True])
    fpr = np.r_[0.0, fp[last] / n_neg]
    tpr = np.r_[0.0, tp[last] / n_pos]
    thr = np.r_[np.inf, p_sorted[last]]
    return RocCurve(fpr, tpr, thr)


def auc(curve: RocCurve) -> float:
    f, t = curve.fpr, curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) * 0.5))


def roc_auc(probs, Y) -> float:
    return auc(roc_curve(probs, Y))


def er_point(curve: RocCurve) -> int:
    """Index of the point nearest (0, 1).

    Ties within TIE_TOL go to the higher TPR, then to the lower threshold.
    """
    dist = np.sqrt(curve.fpr ** 2 + (1.0 - curve.tpr) ** 2)
    cand = np.flatnonzero(dist <= dist.min() + TIE_TOL)
    best_tpr = curve.tpr[cand].max()
    cand = cand[curve.tpr[cand] == best_tpr]
    return int(cand[np.argmin(curve.thresholds[cand])])


def er_threshold(curve: RocCurve) -> float:
    return float(curve.thresholds[er_point(curve)])
