"""Transfer a performance model into an equalized-odds model.

The fair model starts from the performance model's weights and descends a
smooth surrogate of

    EOD(hard predictions) + [overall TPR stays within +-epsilon of the anchor]

Hard decisions ``p >= t`` are softened to ``s = sigmoid((p - t) / tau)`` at
the inherited threshold ``t``; group rates become cell means of ``s``. The
TPR band is enforced by a squared hinge penalty
``lambda * max(0, |softTPR - anchor| - epsilon)**2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .fairness import CELLS, DegenerateCellError, FairnessMetrics, eod_squared
from .logistic import (ModelWeights, TrainingDiverged, classify, config_hash, predict_proba,
                       sigmoid)
from .roc import er_threshold, roc_curve

__all__ = [
    "FairTransferConfig",
    "CoefficientDelta",
    "TransferResult",
    "NonImprovingTransfer",
    "init_fair_from",
    "tpr_band_penalty",
    "soft_rates",
    "soft_fair_loss",
    "train_fair_model",
    "coefficient_delta",
]

logger = logging.getLogger(__name__)

EOD_VARIANTS = ("squared_sum", "mean_abs")


@dataclass(frozen=True)
class FairTransferConfig:
    """Fair fine-tuning settings.

    The fine-tune is deliberately short (``max_epochs``): run to convergence
    the surrogate keeps trading discrimination for parity, because the TPR
    band does not protect the false positive rate.
    """

    epsilon: float = 0.02
    surrogate_temperature: float = 0.05
    penalty_weight: float = 10.0
    learning_rate: float = 0.05
    max_epochs: int = 200
    grad_tolerance: float = 1e-7
    seed: int = 0
    eod_variant: str = "squared_sum"
    tpr_slack: float = 0.02

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.surrogate_temperature > 0:
            raise ValueError("surrogate_temperature must be positive")
        if not self.penalty_weight > 0:
            raise ValueError("penalty_weight must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.eod_variant not in EOD_VARIANTS:
            raise ValueError(f"eod_variant must be one of {EOD_VARIANTS}")

    @classmethod
    def from_dict(cls, d: dict) -> "FairTransferConfig":
        return cls(**d)


@dataclass(frozen=True)
class CoefficientDelta:
    feature_names: tuple[str, ...]
    theta_lg: np.ndarray
    theta_fair: np.ndarray
    delta: np.ndarray
    intercept_lg: float
    intercept_fair: float
    intercept_delta: float

    def sorted_rows(self) -> list[dict]:
        """Per-feature rows ordered by |delta|, largest first."""
        order = np.argsort(-np.abs(self.delta), kind="stable")
        return [{"feature": self.feature_names[j], "theta_lg": float(self.theta_lg[j]),
                 "theta_fair": float(self.theta_fair[j]), "delta": float(self.delta[j])}
                for j in order]

    def to_dict(self) -> dict:
        return {"features": self.sorted_rows(),
                "intercept": {"lg": self.intercept_lg, "fair": self.intercept_fair,
                              "delta": self.intercept_delta}}


def coefficient_delta(perf: ModelWeights, fair: ModelWeights) -> CoefficientDelta:
    if perf.feature_names != fair.feature_names:
        raise ValueError("models are bound to different feature names")
    return CoefficientDelta(perf.feature_names, perf.coefficients.copy(),
                            fair.coefficients.copy(), fair.coefficients - perf.coefficients,
                            perf.intercept, fair.intercept, fair.intercept - perf.intercept)


def init_fair_from(perf: ModelWeights) -> ModelWeights:
    """Exact copy of a thresholded performance model to seed fair training."""
    if perf.threshold is None:
        raise ValueError("performance model has no threshold")
    return ModelWeights(perf.coefficients.copy(), perf.intercept, perf.feature_names,
                        perf.threshold, perf.scaler, dict(perf.meta), None)


def tpr_band_penalty(soft_tpr: float, anchor: float, epsilon: float,
                     weight: float) -> tuple[float, float]:
    """Squared hinge on leaving [anchor - eps, anchor + eps]; returns (value, d/dsoft_tpr)."""
    gap = soft_tpr - anchor
    excess = abs(gap) - epsilon
    if excess <= 0:
        return 0.0, 0.0
    return weight * excess * excess, 2.0 * weight * excess * np.sign(gap)


def soft_rates(w: ModelWeights, X, Y, Z, tau: float):
    """Soft decisions and their per-cell means.

    Returns ``(s, ds_dmargin, cell_rates)`` where ``cell_rates[(y, z)]`` is the
    mean soft decision over rows with Y=y, Z=z.
    """
    p = predict_proba(w, X)
    s = sigmoid((p - w.threshold) / tau)
    ds = s * (1.0 - s) / tau * p * (1.0 - p)
    Y, Z = np.asarray(Y), np.asarray(Z)
    rates, missing = {}, []
    for y, z in CELLS:
        cell = (Y == y) & (Z == z)
        if not cell.any():
            missing.append((y, z))
            continue
        rates[(y, z)] = float(s[cell].mean())
    if missing:
        raise DegenerateCellError(missing)
    return s, ds, rates


def soft_fair_loss(w: ModelWeights, X, Y, Z, cfg: FairTransferConfig,
                   tpr_anchor: float) -> tuple[float, np.ndarray]:
    """Surrogate fair loss and its exact gradient.

    The gradient is a length m+1 vector: coefficients first, intercept last.
    """
    if w.threshold is None:
        raise ValueError("fair loss is defined at a fixed threshold")
    X = np.asarray(X, dtype=np.float64)
    Y, Z = np.asarray(Y), np.asarray(Z)
    s, ds, r = soft_rates(w, X, Y, Z, cfg.surrogate_temperature)
    Xb = np.column_stack([X, np.ones(X.shape[0])])

    def d_cell(y, z):
        cell = (Y == y) & (Z == z)
        return ds[cell] @ Xb[cell] / cell.sum()

    tpr_gap = r[(1, 1)] - r[(1, 0)]
    fpr_gap = r[(0, 1)] - r[(0, 0)]
    d_tpr_gap = d_cell(1, 1) - d_cell(1, 0)
    d_fpr_gap = d_cell(0, 1) - d_cell(0, 0)
    if cfg.eod_variant == "squared_sum":
        eod = tpr_gap ** 2 + fpr_gap ** 2
        grad = 2.0 * tpr_gap * d_tpr_gap + 2.0 * fpr_gap * d_fpr_gap
    else:
        eod = (abs(tpr_gap) + abs(fpr_gap)) / 2
        grad = 0.5 * (np.sign(tpr_gap) * d_tpr_gap + np.sign(fpr_gap) * d_fpr_gap)

    pos = Y == 1
    soft_tpr = float(s[pos].mean())
    pen, d_pen = tpr_band_penalty(soft_tpr, tpr_anchor, cfg.epsilon, cfg.penalty_weight)
    if d_pen:
        grad = grad + d_pen * (ds[pos] @ Xb[pos] / pos.sum())
    return float(eod + pen), grad


class NonImprovingTransfer(RuntimeError):
    """Fair training did not beat the performance model or left the TPR band."""

    def __init__(self, result: "TransferResult"):
        super().__init__(
            f"fair transfer not improving: eod {result.fair_metrics.eod_sq:.6g} vs "
            f"{result.perf_metrics.eod_sq:.6g}, overall TPR {result.fair_metrics.overall_tpr:.4f} "
            f"vs anchor {result.tpr_anchor:.4f}")
        self.result = result


@dataclass(frozen=True)
class TransferResult:
    model: ModelWeights
    delta: CoefficientDelta
    perf_metrics: FairnessMetrics
    fair_metrics: FairnessMetrics
    tpr_anchor: float
    eod_improved: bool
    tpr_in_band: bool
    epochs_run: int
    converged: bool
    loss_history: tuple[float, ...]

    @property
    def improving(self) -> bool:
        return self.eod_improved and self.tpr_in_band


def train_fair_model(d: Dataset, perf: ModelWeights, cfg: FairTransferConfig = FairTransferConfig(),
                     tpr_anchor: float | None = None, strict: bool = False) -> TransferResult:
    """Re-optimize a copy of ``perf`` for equalized odds on ``d``.

    The anchor defaults to ``perf``'s hard overall TPR on ``d``. After
    descent the fair model receives its own ER threshold on ``d``; the
    outcome counts as improving when its hard EOD does not exceed the
    performance model's and its overall TPR stays within
    ``epsilon + tpr_slack`` of the anchor. With ``strict`` a non-improving
    outcome raises :class:`NonImprovingTransfer`.
    """
    if perf.feature_names != d.feature_names:
        raise ValueError("performance model and data have different features")
    w = init_fair_from(perf)
    X, Y, Z = d.features, d.labels, d.group
    perf_metrics = eod_squared(classify(perf, X), Y, Z)
    if tpr_anchor is None:
        tpr_anchor = perf_metrics.overall_tpr

    theta, b = w.coefficients.copy(), w.intercept
    history = []
    epochs, converged = 0, cfg.max_epochs == 0
    for epoch in range(1, cfg.max_epochs + 1):
        cur = ModelWeights(theta, b, w.feature_names, w.threshold)
        loss, grad = soft_fair_loss(cur, X, Y, Z, cfg, tpr_anchor)
        if not np.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        history.append(loss)
        if np.max(np.abs(grad)) < cfg.grad_tolerance:
            converged = True
            break
        theta = theta - cfg.learning_rate * grad[:-1]
        b = b - cfg.learning_rate * grad[-1]
        epochs = epoch

    if epochs == 0:
        fair = w
    else:
        fair = ModelWeights(theta, b, w.feature_names, None, perf.scaler, dict(perf.meta))
        fair = fair.with_threshold(er_threshold(roc_curve(predict_proba(fair, X), Y)))
    fair_metrics = eod_squared(classify(fair, X), Y, Z)
    eod_ok = fair_metrics.eod(cfg.eod_variant) <= perf_metrics.eod(cfg.eod_variant)
    band_ok = abs(fair_metrics.overall_tpr - tpr_anchor) <= cfg.epsilon + cfg.tpr_slack
    fair = replace(fair, meta={**fair.meta, "config_hash": config_hash(cfg), "seed": cfg.seed},
                   transfer={"epsilon": cfg.epsilon, "tau": cfg.surrogate_temperature,
                             "lambda": cfg.penalty_weight, "tpr_anchor": tpr_anchor,
                             "epochs_run": epochs, "converged": converged,
                             "eod_variant": cfg.eod_variant})
    result = TransferResult(fair, coefficient_delta(perf, fair), perf_metrics, fair_metrics,
                            tpr_anchor, eod_ok, band_ok, epochs, converged, tuple(history))
    if not result.improving:
        logger.warning("fair transfer not improving (eod ok: %s, TPR in band: %s)", eod_ok, band_ok)
        if strict:
            raise NonImprovingTransfer(result)
    return result
