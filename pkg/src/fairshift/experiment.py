"""Cross-validated evaluation of the performance model against its fair transfer.

Per fold: fit the scaler on the training rows, train the performance model,
pick its ER threshold on training rows, transfer-train the fair model, then
score both models on the held-out rows and run permutation fairness
importance there.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import DataError, Dataset, FoldAssignment, ScalerParams, standardize, stratified_kfold
from .fairness import CELLS, FairnessMetrics, eod_squared
from .importance import ImportanceReport, ShapReport, fairness_importance, linear_shap, thread_count
from .logistic import ModelWeights, TrainConfig, classify, predict_proba, train_performance_model
from .roc import er_threshold, roc_auc, roc_curve
from .transfer import CoefficientDelta, FairTransferConfig, train_fair_model

__all__ = [
    "SCHEMA_VERSION",
    "METRIC_KEYS",
    "ExperimentConfig",
    "FoldResult",
    "ExperimentReport",
    "evaluate",
    "fit_fold",
    "run_experiment",
]

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
METRIC_KEYS = ("auc", "acc", "tpr_diff_abs", "fpr_diff_abs", "eod_sq", "eod_reported", "overall_tpr")


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 5
    repetitions: int = 100
    master_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    transfer: FairTransferConfig = field(default_factory=FairTransferConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["train"] = TrainConfig.from_dict(d.get("train", {}))
        d["transfer"] = FairTransferConfig.from_dict(d.get("transfer", {}))
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(model: ModelWeights, d: Dataset) -> dict:
    """AUC, accuracy and fairness metrics of a thresholded model on ``d``."""
    p = predict_proba(model, d.features)
    pred = classify(model, d.features)
    fm = eod_squared(pred, d.labels, d.group)
    out = {"auc": roc_auc(p, d.labels), "acc": float(np.mean(pred == d.labels))}
    out.update({k: getattr(fm, k) for k in METRIC_KEYS[2:]})
    out["fairness"] = fm.to_dict()
    return out


@dataclass(frozen=True, eq=False)
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    scaler: ScalerParams
    perf: ModelWeights
    fair: ModelWeights
    tpr_anchor: float
    improving: bool
    perf_metrics: dict
    fair_metrics: dict
    fairness_improvement: float
    importance: ImportanceReport | None
    delta: CoefficientDelta
    shap_perf: ShapReport
    shap_fair: ShapReport

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "scaler": self.scaler.to_dict(),
            "perf_model": self.perf.to_dict(),
            "fair_model": self.fair.to_dict(),
            "tpr_anchor": self.tpr_anchor,
            "improving": self.improving,
            "metrics": {"perf": self.perf_metrics, "fair": self.fair_metrics},
            "fairness_improvement": self.fairness_improvement,
            "importance": None if self.importance is None else self.importance.to_dict(),
            "coefficient_delta": self.delta.to_dict(),
            "shap": {"perf": self.shap_perf.to_dict(include_values=False),
                     "fair": self.shap_fair.to_dict(include_values=False)},
        }


def _missing_cells(d: Dataset) -> list:
    return [(y, z) for y, z in CELLS if not np.any((d.labels == y) & (d.group == z))]


def fit_fold(d: Dataset, train_rows, test_rows, cfg: ExperimentConfig, fold: int = 0,
             importance_seed: int = 0, threads: int | None = 1) -> FoldResult:
    """Run the whole per-fold protocol; every fitted artifact sees only ``train_rows``."""
    train, scaler = standardize(d.take(train_rows))
    test, _ = standardize(d.take(test_rows), scaler)

    perf = train_performance_model(train, cfg.train)
    perf = perf.with_threshold(er_threshold(roc_curve(predict_proba(perf, train.features),
                                                      train.labels)))
    perf = ModelWeights(perf.coefficients, perf.intercept, perf.feature_names, perf.threshold,
                        scaler, perf.meta)
    result = train_fair_model(train, perf, cfg.transfer)
    fair = result.model

    perf_m = evaluate(perf, test)
    fair_m = evaluate(fair, test)
    imp = None
    if cfg.repetitions > 0:
        imp = fairness_importance(test.features, test.labels, test.group, perf, fair,
                                  cfg.repetitions, importance_seed, threads)
    return FoldResult(
        fold=fold, n_train=train.n, n_test=test.n, scaler=scaler, perf=perf, fair=fair,
        tpr_anchor=result.tpr_anchor, improving=result.improving,
        perf_metrics=perf_m, fair_metrics=fair_m,
        fairness_improvement=fair_m["eod_sq"] - perf_m["eod_sq"],
        importance=imp, delta=result.delta,
        shap_perf=linear_shap(perf, test.features, train.features),
        shap_fair=linear_shap(fair, test.features, train.features),
    )


def _mean_std(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std(ddof=1)) if len(v) > 1 else 0.0}


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    feature_names: tuple[str, ...]
    folds: list[FoldResult]
    skipped_folds: list[int]
    manifest: dict | None = None

    def metric(self, model: str, key: str) -> np.ndarray:
        attr = "perf_metrics" if model == "perf" else "fair_metrics"
        return np.array([getattr(f, attr)[key] for f in self.folds])

    @property
    def fairness_improvements(self) -> np.ndarray:
        return np.array([f.fairness_improvement for f in self.folds])

    def aggregate(self) -> dict:
        return {model: {k: _mean_std(self.metric(model, k)) for k in METRIC_KEYS}
                for model in ("perf", "fair")}

    def importance_mean(self) -> np.ndarray | None:
        reps = [f.importance for f in self.folds if f.importance is not None]
        if not reps:
            return None
        return np.mean([r.delta_mean for r in reps], axis=0)

    def _importance_rows(self) -> list[dict]:
        reps = [f.importance for f in self.folds if f.importance is not None]
        if not reps:
            return []
        per_fold = np.array([r.delta_mean for r in reps])
        mean = per_fold.mean(axis=0)
        std = per_fold.std(axis=0, ddof=1) if len(reps) > 1 else np.zeros_like(mean)
        order = np.argsort(-np.abs(mean), kind="stable")
        rank = np.empty(len(mean), dtype=np.int64)
        rank[order] = np.arange(1, len(mean) + 1)
        return [{"feature": self.feature_names[j], "delta_mean": float(mean[j]),
                 "delta_std": float(std[j]), "rank": int(rank[j])} for j in order]

    def _coefficient_rows(self) -> list[dict]:
        lg = np.mean([f.delta.theta_lg for f in self.folds], axis=0)
        fair = np.mean([f.delta.theta_fair for f in self.folds], axis=0)
        delta = np.mean([f.delta.delta for f in self.folds], axis=0)
        order = np.argsort(-np.abs(delta), kind="stable")
        return [{"feature": self.feature_names[j], "theta_lg": float(lg[j]),
                 "theta_fair": float(fair[j]), "delta": float(delta[j])} for j in order]

    def _shap_rows(self) -> list[dict]:
        perf = np.mean([f.shap_perf.mean_abs for f in self.folds], axis=0)
        fair = np.mean([f.shap_fair.mean_abs for f in self.folds], axis=0)
        return [{"feature": name, "mean_abs_shap_perf": float(perf[j]),
                 "mean_abs_shap_fair": float(fair[j])}
                for j, name in enumerate(self.feature_names)]

    def to_dict(self) -> dict:
        fi = self.fairness_improvements
        reps = [f.importance for f in self.folds if f.importance is not None]
        return {
            "schema_version": SCHEMA_VERSION,
            "manifest": self.manifest,
            "config": self.config.to_dict(),
            "feature_names": list(self.feature_names),
            "skipped_folds": self.skipped_folds,
            "aggregate": self.aggregate(),
            "fairness_improvement": {"per_fold": fi.tolist(), **_mean_std(fi)},
            "importance": {"repetitions": self.config.repetitions,
                           "fold_seeds": [r.master_seed for r in reps],
                           "features": self._importance_rows()},
            "coefficients": self._coefficient_rows(),
            "shap": self._shap_rows(),
            "folds": [f.to_dict() for f in self.folds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, outdir) -> list[str]:
        """experiment.json plus metrics.csv, importance.csv and coefficients.csv."""
        os.makedirs(outdir, exist_ok=True)
        paths = []

        def path(name):
            p = os.path.join(outdir, name)
            paths.append(p)
            return p

        with open(path("experiment.json"), "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")
        with open(path("metrics.csv"), "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["fold", "model", *METRIC_KEYS])
            for fr in self.folds:
                for model, m in (("perf", fr.perf_metrics), ("fair", fr.fair_metrics)):
                    w.writerow([fr.fold, model, *(repr(float(m[k])) for k in METRIC_KEYS)])
            agg = self.aggregate()
            for model in ("perf", "fair"):
                w.writerow(["mean", model, *(repr(agg[model][k]["mean"]) for k in METRIC_KEYS)])
        with open(path("importance.csv"), "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["feature", "delta_mean", "delta_std", "rank"])
            for r in self._importance_rows():
                w.writerow([r["feature"], repr(r["delta_mean"]), repr(r["delta_std"]), r["rank"]])
        with open(path("coefficients.csv"), "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["feature", "theta_lg", "theta_fair", "delta"])
            for r in self._coefficient_rows():
                w.writerow([r["feature"], repr(r["theta_lg"]), repr(r["theta_fair"]),
                            repr(r["delta"])])
        return paths


def _fold_seed(master_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([master_seed, fold]).generate_state(1)[0])


def run_experiment(d: Dataset, cfg: ExperimentConfig = ExperimentConfig(),
                   threads: int | None = None, manifest: dict | None = None) -> ExperimentReport:
    """k-fold protocol over ``d``; deterministic for a given ``cfg.master_seed``.

    A fold whose test rows miss a (Y, Z) cell is skipped with a warning; if
    more than one fold is affected the run fails.
    """
    folds: FoldAssignment = stratified_kfold(d, cfg.k, cfg.master_seed)
    splits, skipped = [], []
    for f in range(cfg.k):
        train_rows, test_rows = folds.split(f)
        missing = _missing_cells(d.take(test_rows))
        if missing:
            skipped.append(f)
            logger.warning("fold %d skipped: test rows miss cells %s", f, missing)
            continue
        splits.append((f, train_rows, test_rows))
    if len(skipped) > 1:
        raise DataError(f"{len(skipped)} folds lack a (Y, Z) cell in their test rows")

    workers = min(thread_count(threads), len(splits))

    def one(split):
        f, tr, te = split
        return fit_fold(d, tr, te, cfg, f, _fold_seed(cfg.master_seed, f), threads=1)

    if workers <= 1:
        results = [one(s) for s in splits]
    else:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, splits))
    return ExperimentReport(cfg, d.feature_names, results, skipped, manifest)
