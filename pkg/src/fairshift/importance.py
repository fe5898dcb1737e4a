"""Permutation importance for fairness and for prediction, and exact linear SHAP."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .fairness import eod_squared
from .logistic import ModelWeights, classify, predict_proba
from .roc import roc_auc

__all__ = [
    "ImportanceReport",
    "ShapReport",
    "repetition_rng",
    "permute_column",
    "fairness_importance",
    "predictive_importance",
    "linear_shap",
    "thread_count",
]

logger = logging.getLogger(__name__)

# share of repetitions that may be dropped as degenerate before giving up
DEGENERATE_BUDGET = 0.05


def thread_count(threads: int | None = None) -> int:
    """Worker count: explicit value, else FAIRSHIFT_THREADS, 0 meaning all CPUs."""
    if threads is None:
        threads = int(os.environ.get("FAIRSHIFT_THREADS", "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def repetition_rng(master_seed: int, feature: int, repetition: int) -> np.random.Generator:
    """Independent stream for one (feature, repetition) pair."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, feature, repetition]))


def permute_column(X, i: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``X`` with column ``i`` Fisher-Yates shuffled.

    Draws ``n - 1`` uniforms from ``rng``; step k (from n-1 down to 1) swaps
    position k with ``floor(u * (k + 1))``.
    """
    X = np.asarray(X)
    n, m = X.shape
    if not 0 <= i < m:
        raise IndexError(f"feature index {i} out of range for {m} columns")
    out = X.copy()
    if n < 2:
        return out
    u = rng.random(n - 1)
    ks = np.arange(n - 1, 0, -1)
    js = (u * (ks + 1)).astype(np.int64)
    col = out[:, i].tolist()
    for k, j in zip(ks.tolist(), js.tolist()):
        col[k], col[j] = col[j], col[k]
    out[:, i] = col
    return out


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    feature_names: tuple[str, ...]
    delta_samples: np.ndarray  # (m, J)
    delta_mean: np.ndarray
    rank: np.ndarray  # 1 = most important
    repetitions: int
    master_seed: int
    baseline: float
    mode: str
    excluded: int = 0

    @property
    def delta_std(self) -> np.ndarray:
        J = self.delta_samples.shape[1]
        return self.delta_samples.std(axis=1, ddof=1) if J > 1 else np.zeros(len(self.delta_mean))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "baseline": self.baseline,
            "excluded_repetitions": self.excluded,
            "features": [
                {"feature": name, "delta_mean": float(self.delta_mean[j]),
                 "delta_std": float(self.delta_std[j]), "rank": int(self.rank[j]),
                 "delta_samples": self.delta_samples[j].tolist()}
                for j, name in enumerate(self.feature_names)
            ],
        }

    def rows(self) -> list[tuple]:
        std = self.delta_std
        order = np.argsort(self.rank, kind="stable")
        return [(self.feature_names[j], float(self.delta_mean[j]), float(std[j]), int(self.rank[j]))
                for j in order]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["feature", "delta_mean", "delta_std", "rank"])
            for name, mean, std, rank in self.rows():
                w.writerow([name, repr(mean), repr(std), rank])

    def top(self) -> str:
        return self.feature_names[int(np.argmin(self.rank))]


def _ranks(score: np.ndarray) -> np.ndarray:
    order = np.argsort(-score, kind="stable")
    rank = np.empty(len(score), dtype=np.int64)
    rank[order] = np.arange(1, len(score) + 1)
    return rank


def _run_repetitions(fn, m: int, J: int, master_seed: int, threads: int | None) -> np.ndarray:
    def feature_row(i):
        return [fn(i, repetition_rng(master_seed, i, j)) for j in range(J)]

    workers = min(thread_count(threads), m)
    if workers <= 1:
        rows = [feature_row(i) for i in range(m)]
    else:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(feature_row, range(m)))
    return np.array(rows, dtype=np.float64).reshape(m, J)


def _finish(samples: np.ndarray, names, J, master_seed, baseline, mode, rank_by_abs):
    bad = ~np.isfinite(samples)
    n_bad = int(bad.sum())
    if n_bad:
        if n_bad > DEGENERATE_BUDGET * samples.size:
            raise ValueError(f"{n_bad} of {samples.size} repetitions degenerate")
        logger.warning("excluding %d degenerate repetitions", n_bad)
    masked = np.where(bad, 0.0, samples)
    mean = masked.sum(axis=1) / np.maximum((~bad).sum(axis=1), 1)
    if not n_bad:
        mean = samples.mean(axis=1)
    rank = _ranks(np.abs(mean) if rank_by_abs else mean)
    return ImportanceReport(tuple(names), samples, mean, rank, J, master_seed,
                            float(baseline), mode, n_bad)


def fairness_importance(X, Y, Z, model_lg: ModelWeights, model_fair: ModelWeights,
                        repetitions: int = 100, master_seed: int = 0,
                        threads: int | None = None) -> ImportanceReport:
    """Mean fairness improvement over datasets with one feature column shuffled.

    For feature i and repetition j the sample is
    ``EOD(fair, X~) - EOD(lg, X~)`` with column i of ``X~`` permuted by
    :func:`repetition_rng` (master_seed, i, j). ``Z`` is never permuted, even
    when a race column is among the features. Features are ranked by
    ``|delta_mean|``.

    A dataset with an empty (Y, Z) cell has undefined rates; the affected
    gap is then counted as zero (with a warning). Permutations leave Y and Z
    alone, so every repetition is degenerate in the same way as the baseline.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if model_lg.threshold is None or model_fair.threshold is None:
        raise ValueError("both models need thresholds")
    X = np.asarray(X, dtype=np.float64)
    Y, Z = np.asarray(Y), np.asarray(Z)
    base_lg = eod_squared(classify(model_lg, X), Y, Z, strict=False)
    strict = not base_lg.rates.degenerate
    if not strict:
        logger.warning("degenerate (Y, Z) cells %s; their rate gaps count as zero",
                       base_lg.rates.degenerate)

    def improvement(Xp):
        e_fair = eod_squared(classify(model_fair, Xp), Y, Z, strict).eod_sq
        e_lg = eod_squared(classify(model_lg, Xp), Y, Z, strict).eod_sq
        return e_fair - e_lg

    baseline = improvement(X)
    samples = _run_repetitions(lambda i, rng: improvement(permute_column(X, i, rng)),
                               X.shape[1], repetitions, master_seed, threads)
    return _finish(samples, model_lg.feature_names, repetitions, master_seed, baseline,
                   "fairness", rank_by_abs=True)


def predictive_importance(X, Y, model: ModelWeights, metric: str = "auc",
                          repetitions: int = 100, master_seed: int = 0,
                          threads: int | None = None) -> ImportanceReport:
    """Classic permutation importance: metric(original) - metric(permuted), averaged."""
    if metric not in ("auc", "acc"):
        raise ValueError("metric must be 'auc' or 'acc'")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)

    def score(Xp):
        if metric == "auc":
            return roc_auc(predict_proba(model, Xp), Y)
        return float(np.mean(classify(model, Xp) == Y))

    base = score(X)
    samples = _run_repetitions(lambda i, rng: base - score(permute_column(X, i, rng)),
                               X.shape[1], repetitions, master_seed, threads)
    return _finish(samples, model.feature_names, repetitions, master_seed, base,
                   f"predictive_{metric}", rank_by_abs=False)


@dataclass(frozen=True, eq=False)
class ShapReport:
    feature_names: tuple[str, ...]
    values: np.ndarray  # (n, m), log-odds units
    base_value: float
    mean_abs: np.ndarray
    rank: np.ndarray

    def to_dict(self, include_values: bool = True) -> dict:
        d = {
            "scale": "log_odds",
            "base_value": self.base_value,
            "features": [{"feature": name, "mean_abs_shap": float(self.mean_abs[j]),
                          "rank": int(self.rank[j])}
                         for j, name in enumerate(self.feature_names)],
        }
        if include_values:
            d["values"] = self.values.tolist()
        return d

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["feature", "mean_abs_shap", "rank"])
            for j in np.argsort(self.rank, kind="stable"):
                w.writerow([self.feature_names[j], repr(float(self.mean_abs[j])), int(self.rank[j])])


def linear_shap(model: ModelWeights, X, background) -> ShapReport:
    """Exact interventional SHAP values of the margin for a linear model.

    shap[i, j] = theta_j * (x_ij - mean(background[:, j])), and
    base_value = theta . mean(background) + b, so each row sums to its margin.
    """
    X = np.asarray(X, dtype=np.float64)
    B = np.asarray(background, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] == 0:
        raise ValueError("background must be a nonempty matrix")
    if B.shape[1] != model.m or X.ndim != 2 or X.shape[1] != model.m:
        raise ValueError(f"model has {model.m} features; got X {X.shape}, background {B.shape}")
    mu = B.mean(axis=0)
    values = (X - mu) * model.coefficients
    base = float(mu @ model.coefficients + model.intercept)
    mean_abs = np.abs(values).mean(axis=0)
    return ShapReport(model.feature_names, values, base, mean_abs, _ranks(mean_abs))
