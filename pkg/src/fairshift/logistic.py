"""Logistic regression trained by full-batch gradient descent on summed BCE."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import DataError, Dataset, ScalerParams

__all__ = [
    "PROB_EPS",
    "ModelWeights",
    "TrainConfig",
    "TrainingDiverged",
    "sigmoid",
    "margin",
    "predict_proba",
    "bce_loss",
    "bce_gradient",
    "train_performance_model",
    "classify",
    "config_hash",
]

logger = logging.getLogger(__name__)

PROB_EPS = 1e-12


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """Coefficients, intercept and decision threshold of a logistic model.

    ``threshold`` stays ``None`` until an operating point is chosen; the
    arrays are read-only so trained weights can be shared freely.
    """

    coefficients: np.ndarray
    intercept: float
    feature_names: tuple[str, ...]
    threshold: float | None = None
    scaler: ScalerParams | None = None
    meta: dict = field(default_factory=dict)
    transfer: dict | None = None

    def __post_init__(self):
        theta = np.array(self.coefficients, dtype=np.float64)
        names = tuple(self.feature_names)
        if theta.ndim != 1 or theta.shape[0] != len(names):
            raise ValueError(f"{theta.shape} coefficients for {len(names)} feature names")
        if not (np.all(np.isfinite(theta)) and np.isfinite(self.intercept)):
            raise ValueError("weights must be finite")
        if self.threshold is not None:
            t = float(self.threshold)
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t} outside [0, 1]")
            object.__setattr__(self, "threshold", t)
        theta.setflags(write=False)
        object.__setattr__(self, "coefficients", theta)
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "feature_names", names)

    @property
    def m(self) -> int:
        return self.coefficients.shape[0]

    def with_threshold(self, t: float) -> "ModelWeights":
        return replace(self, threshold=t)

    def to_dict(self) -> dict:
        d = {
            "feature_names": list(self.feature_names),
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "threshold": self.threshold,
            "scaler": None if self.scaler is None else self.scaler.to_dict(),
            "meta": self.meta,
        }
        if self.transfer is not None:
            d["transfer"] = self.transfer
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelWeights":
        scaler = d.get("scaler")
        return cls(d["coefficients"], d["intercept"], d["feature_names"], d.get("threshold"),
                   None if scaler is None else ScalerParams.from_dict(scaler),
                   dict(d.get("meta", {})), d.get("transfer"))


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings.

    The loss is a sum over rows, so its curvature grows with n. With
    ``learning_rate=None`` the step is 1/L, L being the Lipschitz constant of
    the gradient (0.25 * ||[X, 1]||_2^2 + 2 * l2_penalty), which is safe for
    any n. An explicit learning rate must shrink roughly like 1/n.
    """

    learning_rate: float | None = None
    max_epochs: int = 20000
    grad_tolerance: float = 1e-6
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def config_hash(cfg) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def sigmoid(t):
    # two-branch form avoids exp overflow for large |t|
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_X(w: ModelWeights, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != w.m:
        raise ValueError(f"model has {w.m} features, matrix has shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    return X


def margin(w: ModelWeights, X) -> np.ndarray:
    """Log-odds theta . x + b for every row."""
    return _check_X(w, X) @ w.coefficients + w.intercept


def predict_proba(w: ModelWeights, X) -> np.ndarray:
    return sigmoid(margin(w, X))


def _check_y(X: np.ndarray, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != (X.shape[0],):
        raise ValueError(f"{Y.shape[0] if Y.ndim else 0} labels for {X.shape[0]} rows")
    return Y


def bce_loss(w: ModelWeights, X, Y, l2_penalty: float = 0.0) -> float:
    """Summed binary cross-entropy, plus ``l2_penalty * ||theta||^2``."""
    p = predict_proba(w, X)
    Y = _check_y(np.asarray(X), Y)
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = -np.sum(Y * np.log(p) + (1.0 - Y) * np.log1p(-p))
    return float(loss + l2_penalty * np.dot(w.coefficients, w.coefficients))


def bce_gradient(w: ModelWeights, X, Y, l2_penalty: float = 0.0) -> tuple[np.ndarray, float]:
    """Gradient of :func:`bce_loss` as ``(d/dtheta, d/db)``.

    Uses the unclamped probabilities; the clamp only guards the logarithms.
    """
    X = _check_X(w, X)
    Y = _check_y(X, Y)
    r = sigmoid(X @ w.coefficients + w.intercept) - Y
    return X.T @ r + 2.0 * l2_penalty * w.coefficients, float(r.sum())


def train_performance_model(d: Dataset, cfg: TrainConfig = TrainConfig()) -> ModelWeights:
    """Fit theta and b from zero by full-batch gradient descent.

    Stops once the gradient's infinity norm drops below ``grad_tolerance``
    or after ``max_epochs`` steps. The returned model has no threshold.
    """
    if d.labels.min() == d.labels.max():
        raise DataError("training data needs both classes")
    X, Y = d.features, d.labels.astype(np.float64)
    n, m = X.shape
    lam = cfg.l2_penalty
    if cfg.learning_rate is None:
        L = 0.25 * np.linalg.norm(np.column_stack([X, np.ones(n)]), 2) ** 2 + 2.0 * lam
        lr = 1.0 / L
    else:
        lr = cfg.learning_rate

    theta, b = np.zeros(m), 0.0
    epoch, converged = 0, False
    initial = loss = n * np.log(2.0)
    for epoch in range(1, cfg.max_epochs + 1):
        r = sigmoid(X @ theta + b) - Y
        g_theta = X.T @ r + 2.0 * lam * theta
        g_b = r.sum()
        if max(np.max(np.abs(g_theta)), abs(g_b)) < cfg.grad_tolerance:
            converged = True
            epoch -= 1
            break
        theta = theta - lr * g_theta
        b = b - lr * g_b
        if not (np.all(np.isfinite(theta)) and np.isfinite(b)):
            raise TrainingDiverged(epoch, float("nan"))
    w = ModelWeights(theta, b, d.feature_names)
    loss = bce_loss(w, X, Y, lam)
    if not np.isfinite(loss):
        raise TrainingDiverged(epoch, loss)
    if not converged:
        logger.warning("gradient descent stopped at max_epochs=%d before reaching "
                       "grad_tolerance=%g", cfg.max_epochs, cfg.grad_tolerance)
    meta = {"seed": cfg.seed, "config_hash": config_hash(cfg), "epochs_run": epoch,
            "converged": converged, "initial_loss": float(initial), "final_loss": loss}
    return replace(w, meta=meta)


def classify(w: ModelWeights, X) -> np.ndarray:
    """Hard labels: 1 where p >= threshold (ties go positive)."""
    if w.threshold is None:
        raise ValueError("model has no threshold; select one first")
    return (predict_proba(w, X) >= w.threshold).astype(np.int8)
