"""Synthetic sepsis-like cohorts with a controllable source of group disparity."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .logistic import sigmoid

__all__ = [
    "FeatureSpec",
    "Disparity",
    "CohortSpec",
    "generate_synthetic",
    "default_features",
    "default_cohort_spec",
]

FAMILIES = ("normal", "bernoulli", "uniform")
DISPARITIES = ("none", "label_noise", "feature_shift")


@dataclass(frozen=True)
class FeatureSpec:
    """One generated column.

    ``params``: normal -> (mean, std); bernoulli -> (p,); uniform -> (low, high).
    ``group_shift`` maps a group (0 or 1) to an additive shift applied before
    labels are drawn, so the outcome model stays correct for that group.
    """

    name: str
    family: str
    params: tuple[float, ...]
    group_shift: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        object.__setattr__(self, "group_shift",
                           {int(k): float(v) for k, v in dict(self.group_shift).items()})
        if self.family not in FAMILIES:
            raise ValueError(f"{self.name}: unknown family {self.family!r}")
        p = self.params
        if self.family == "normal" and not (len(p) == 2 and p[1] > 0):
            raise ValueError(f"{self.name}: normal needs (mean, std > 0)")
        if self.family == "bernoulli" and not (len(p) == 1 and 0.0 <= p[0] <= 1.0):
            raise ValueError(f"{self.name}: bernoulli needs (p in [0, 1])")
        if self.family == "uniform" and not (len(p) == 2 and p[0] < p[1]):
            raise ValueError(f"{self.name}: uniform needs (low < high)")
        if set(self.group_shift) - {0, 1}:
            raise ValueError(f"{self.name}: group_shift keys must be 0 or 1")
        if self.family == "bernoulli" and self.group_shift:
            raise ValueError(f"{self.name}: bernoulli columns cannot be shifted")

    @property
    def binary(self) -> bool:
        return self.family == "bernoulli"


@dataclass(frozen=True)
class Disparity:
    """How outcomes or features are distorted for one group after labelling.

    ``label_noise`` flips each label of ``group`` with probability
    ``flip_rate``. ``feature_shift`` adds ``delta`` to ``feature`` for rows of
    ``group``; labels were drawn from the unshifted values.
    """

    kind: str = "none"
    group: int = 0
    flip_rate: float = 0.0
    feature: str | None = None
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in DISPARITIES:
            raise ValueError(f"unknown disparity {self.kind!r}")
        if self.group not in (0, 1):
            raise ValueError("disparity group must be 0 or 1")
        if not 0.0 <= self.flip_rate < 0.5:
            raise ValueError("flip_rate must be in [0, 0.5)")
        if self.kind == "feature_shift" and not self.feature:
            raise ValueError("feature_shift needs a feature name")


@dataclass(frozen=True)
class CohortSpec:
    n: int
    features: tuple[FeatureSpec, ...]
    true_theta: dict
    intercept: float
    disparity: Disparity = Disparity()
    group_fraction: float = 0.166
    group_feature: str | None = "race"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 < self.group_fraction < 1.0:
            raise ValueError("group_fraction must be in (0, 1)")
        names = self.feature_names
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        unknown = set(self.true_theta) - set(names)
        if unknown:
            raise ValueError(f"true_theta names unknown features: {sorted(unknown)}")
        d = self.disparity
        if d.kind == "feature_shift" and d.feature not in names:
            raise ValueError(f"feature_shift targets unknown feature {d.feature!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        names = tuple(f.name for f in self.features)
        return names + ((self.group_feature,) if self.group_feature else ())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["features"] = [{**asdict(f), "params": list(f.params),
                          "group_shift": {str(k): v for k, v in f.group_shift.items()}}
                         for f in self.features]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSpec":
        d = dict(d)
        d["features"] = tuple(FeatureSpec(**f) for f in d["features"])
        d["disparity"] = Disparity(**d.get("disparity", {}))
        return cls(**d)


def _draw(f: FeatureSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if f.family == "normal":
        return rng.normal(f.params[0], f.params[1], n)
    if f.family == "bernoulli":
        return (rng.random(n) < f.params[0]).astype(np.float64)
    return rng.uniform(f.params[0], f.params[1], n)


def generate_synthetic(spec: CohortSpec) -> Dataset:
    """Draw a cohort: group, features, Bernoulli labels, then the disparity."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    # group_fraction is the share of Z=0 (Non-White)
    z = (rng.random(n) >= spec.group_fraction).astype(np.int8)
    cols = []
    for f in spec.features:
        x = _draw(f, n, rng)
        for g, shift in f.group_shift.items():
            x = x + shift * (z == g)
        cols.append(x)
    if spec.group_feature:
        cols.append(z.astype(np.float64))
    X = np.column_stack(cols)
    names = spec.feature_names
    theta = np.array([spec.true_theta.get(name, 0.0) for name in names])
    y = (rng.random(n) < sigmoid(X @ theta + spec.intercept)).astype(np.int8)

    dis = spec.disparity
    in_group = z == dis.group
    if dis.kind == "label_noise":
        flip = in_group & (rng.random(n) < dis.flip_rate)
        y = np.where(flip, 1 - y, y).astype(np.int8)
    elif dis.kind == "feature_shift":
        j = names.index(dis.feature)
        X[:, j] = X[:, j] + dis.delta * in_group

    binary = tuple(f.name for f in spec.features if f.binary)
    if spec.group_feature:
        binary += (spec.group_feature,)
    return Dataset(X, y, z, names, binary)


# name, family, params, log-odds effect per standard deviation (per unit for binaries)
_MENU = (
    ("age", "normal", (66.0, 15.0), 0.45),
    ("gender", "bernoulli", (0.57,), 0.05),
    ("temperature", "normal", (36.9, 0.6), -0.10),
    ("weight", "normal", (82.0, 22.0), -0.15),
    ("heart_rate", "normal", (88.0, 16.0), 0.15),
    ("glucose", "normal", (140.0, 40.0), 0.10),
    ("sbp", "normal", (115.0, 15.0), -0.15),
    ("dbp", "normal", (62.0, 10.0), -0.10),
    ("spo2", "normal", (97.0, 1.8), -0.15),
    ("resp_rate", "normal", (20.0, 4.0), 0.25),
    ("rrt", "bernoulli", (0.08,), 0.40),
    ("sofa", "normal", (6.0, 3.0), 0.20),
    ("cci", "normal", (5.5, 2.5), 0.55),
    ("apsiii", "normal", (50.0, 20.0), 0.75),
)


def default_features() -> tuple[tuple[FeatureSpec, ...], dict, float]:
    """Clinical-looking feature menu, raw-unit coefficients and intercept.

    Coefficients are set per standard deviation and converted to raw units;
    the intercept puts the death rate near 16-17%.
    """
    feats, theta = [], {}
    offset = -1.75
    for name, family, params, effect in _MENU:
        feats.append(FeatureSpec(name, family, params))
        if family == "normal":
            theta[name] = effect / params[1]
            offset -= theta[name] * params[0]
        else:
            theta[name] = effect
            offset -= effect * params[0]
    return tuple(feats), theta, offset


def default_cohort_spec(n: int = 10_000, disparity: Disparity = Disparity(),
                        seed: int = 0, group_fraction: float = 0.166) -> CohortSpec:
    feats, theta, b = default_features()
    theta["race"] = 0.0
    return CohortSpec(n, feats, theta, b, disparity, group_fraction, "race", seed)
