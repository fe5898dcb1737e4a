"""Group-conditional error rates and equalized-odds disparity.

Two disparity numbers are kept side by side. ``eod_sq`` is the sum of the
squared TPR and FPR gaps and is what the fair model optimizes and what the
fairness improvement uses. ``eod_reported`` is the mean of the absolute gaps,
the convention under which gaps of 0.071 and 0.064 are summarized as 0.068.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .logistic import ModelWeights, classify

__all__ = [
    "DegenerateCellError",
    "GroupRates",
    "FairnessMetrics",
    "group_rates",
    "eod_squared",
    "fairness_improvement",
]

# (Y, Z) cells: TPR needs Y=1 in both groups, FPR needs Y=0 in both groups
CELLS = ((1, 1), (1, 0), (0, 1), (0, 0))


class DegenerateCellError(ValueError):
    def __init__(self, cells):
        self.cells = list(cells)
        names = ", ".join(f"Y={y},Z={z}" for y, z in self.cells)
        super().__init__(f"empty conditioning cell(s): {names}")


@dataclass(frozen=True)
class GroupRates:
    tpr_g1: float
    fpr_g1: float
    tpr_g0: float
    fpr_g0: float
    counts: dict

    @property
    def degenerate(self) -> list[tuple[int, int]]:
        return [(y, z) for y, z in CELLS
                if self.counts[f"g{z}"]["tp" if y else "fp"]
                + self.counts[f"g{z}"]["fn" if y else "tn"] == 0]


@dataclass(frozen=True)
class FairnessMetrics:
    tpr_diff_sq: float
    fpr_diff_sq: float
    eod_sq: float
    tpr_diff_abs: float
    fpr_diff_abs: float
    eod_reported: float
    overall_tpr: float
    rates: GroupRates

    def to_dict(self) -> dict:
        r = self.rates
        return {
            "tpr_diff_sq": self.tpr_diff_sq,
            "fpr_diff_sq": self.fpr_diff_sq,
            "eod_sq": self.eod_sq,
            "tpr_diff_abs": self.tpr_diff_abs,
            "fpr_diff_abs": self.fpr_diff_abs,
            "eod_reported": self.eod_reported,
            "overall_tpr": self.overall_tpr,
            "rates": {"tpr_g1": r.tpr_g1, "fpr_g1": r.fpr_g1,
                      "tpr_g0": r.tpr_g0, "fpr_g0": r.fpr_g0},
            "counts": r.counts,
            "degenerate_cells": [f"Y={y},Z={z}" for y, z in r.degenerate],
        }

    def eod(self, variant: str = "squared_sum") -> float:
        if variant == "squared_sum":
            return self.eod_sq
        if variant == "mean_abs":
            return self.eod_reported
        raise ValueError(f"unknown EOD variant {variant!r}")


def _ratio(a: int, b: int) -> float:
    return a / b if b else float("nan")


def group_rates(preds, Y, Z, strict: bool = True) -> GroupRates:
    """Empirical TPR and FPR within each group.

    With ``strict`` an empty (Y, Z) cell raises DegenerateCellError;
    otherwise the affected rate is NaN.
    """
    preds, Y, Z = (np.asarray(a).astype(np.int64) for a in (preds, Y, Z))
    if not (preds.shape == Y.shape == Z.shape) or preds.ndim != 1:
        raise ValueError("preds, Y and Z must be equal-length vectors")
    counts = {}
    for g in (1, 0):
        in_g = Z == g
        counts[f"g{g}"] = {
            "tp": int(np.sum(in_g & (Y == 1) & (preds == 1))),
            "fn": int(np.sum(in_g & (Y == 1) & (preds == 0))),
            "fp": int(np.sum(in_g & (Y == 0) & (preds == 1))),
            "tn": int(np.sum(in_g & (Y == 0) & (preds == 0))),
        }
    c1, c0 = counts["g1"], counts["g0"]
    rates = GroupRates(
        tpr_g1=_ratio(c1["tp"], c1["tp"] + c1["fn"]),
        fpr_g1=_ratio(c1["fp"], c1["fp"] + c1["tn"]),
        tpr_g0=_ratio(c0["tp"], c0["tp"] + c0["fn"]),
        fpr_g0=_ratio(c0["fp"], c0["fp"] + c0["tn"]),
        counts=counts,
    )
    if strict and rates.degenerate:
        raise DegenerateCellError(rates.degenerate)
    return rates


def eod_squared(preds, Y, Z, strict: bool = True) -> FairnessMetrics:
    """Equalized-odds disparity of hard predictions.

    In non-strict mode a gap whose rates are undefined counts as zero.
    """
    r = group_rates(preds, Y, Z, strict)
    tpr_gap = r.tpr_g1 - r.tpr_g0
    fpr_gap = r.fpr_g1 - r.fpr_g0
    tpr_gap = 0.0 if np.isnan(tpr_gap) else tpr_gap
    fpr_gap = 0.0 if np.isnan(fpr_gap) else fpr_gap
    tpr_sq, fpr_sq = tpr_gap * tpr_gap, fpr_gap * fpr_gap
    tpr_abs, fpr_abs = abs(tpr_gap), abs(fpr_gap)
    c1, c0 = r.counts["g1"], r.counts["g0"]
    tp = c1["tp"] + c0["tp"]
    return FairnessMetrics(
        tpr_diff_sq=tpr_sq,
        fpr_diff_sq=fpr_sq,
        eod_sq=tpr_sq + fpr_sq,
        tpr_diff_abs=tpr_abs,
        fpr_diff_abs=fpr_abs,
        eod_reported=(tpr_abs + fpr_abs) / 2,
        overall_tpr=_ratio(tp, tp + c1["fn"] + c0["fn"]),
        rates=r,
    )


def fairness_improvement(X, Y, Z, model_lg: ModelWeights, model_fair: ModelWeights,
                         strict: bool = True) -> float:
    """EOD(fair) - EOD(lg) on the same rows; negative means the fair model is fairer."""
    e_fair = eod_squared(classify(model_fair, X), Y, Z, strict).eod_sq
    e_lg = eod_squared(classify(model_lg, X), Y, Z, strict).eod_sq
    return e_fair - e_lg
