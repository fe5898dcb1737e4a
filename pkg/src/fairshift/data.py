"""Cohort tables: loading, cleaning, scaling and fold splitting.

Everything downstream consumes a :class:`Dataset`: a float feature matrix,
0/1 mortality labels ``labels`` (1 = died), a 0/1 group indicator ``group``
(1 = White, 0 = Non-White) and the column names binding the two together.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataError",
    "Dataset",
    "Schema",
    "ScalerParams",
    "FoldAssignment",
    "load_schema",
    "load_race_aliases",
    "load_csv",
    "write_csv",
    "binarize_race",
    "interpercentile_bounds",
    "apply_bounds",
    "filter_interpercentile",
    "standardize",
    "unstandardize",
    "stratified_kfold",
    "prepare_csv",
]


class DataError(ValueError):
    """Input data violates a Dataset invariant or cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    group: np.ndarray
    feature_names: tuple[str, ...]
    binary: tuple[str, ...] = ()
    index: np.ndarray | None = None
    n_dropped: int = 0

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, m = X.shape
        if n < 1 or m < 1:
            raise DataError(f"dataset must have n >= 1 and m >= 1, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or infinite entries")
        y = _binary_vector(self.labels, "labels", n)
        z = _binary_vector(self.group, "group", n)
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != m:
            raise DataError(f"{len(names)} feature names for {m} columns")
        if len(set(names)) != m:
            raise DataError("feature_names contain duplicates")
        unknown = set(self.binary) - set(names)
        if unknown:
            raise DataError(f"binary columns not among features: {sorted(unknown)}")
        idx = np.arange(n) if self.index is None else np.asarray(self.index, dtype=np.int64)
        if idx.shape != (n,):
            raise DataError("index length does not match row count")
        for arr in (X, y, z, idx):
            arr.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "group", z)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "binary", tuple(self.binary))
        object.__setattr__(self, "index", idx)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def take(self, rows) -> "Dataset":
        """Row subset; keeps ``index`` so rows stay traceable to the source."""
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.group[rows],
                       self.feature_names, self.binary, self.index[rows])

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.labels, self.group, self.feature_names,
                       self.binary, self.index, self.n_dropped)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.features, y, self.group, self.feature_names,
                       self.binary, self.index, self.n_dropped)

    def column(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None


def _binary_vector(values, what: str, n: int) -> np.ndarray:
    v = np.asarray(values)
    if v.shape != (n,):
        raise DataError(f"{what} has shape {v.shape}, expected ({n},)")
    if v.dtype.kind == "f" and not np.all(np.isfinite(v)):
        raise DataError(f"{what} contains non-finite values")
    bad = ~np.isin(v, (0, 1))
    if bad.any():
        raise DataError(f"{what} outside {{0,1}}: {v[bad][0]!r}")
    return v.astype(np.int8)


@dataclass(frozen=True)
class Schema:
    """Column roles for a cohort CSV."""

    label: str
    group: str
    features: tuple[str, ...]
    binary: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "binary", tuple(self.binary))
        if not self.features:
            raise DataError("schema lists no feature columns")
        if len(set(self.features)) != len(self.features):
            raise DataError("schema feature list contains duplicates")
        extra = set(self.binary) - set(self.features)
        if extra:
            raise DataError(f"binary columns not in feature list: {sorted(extra)}")

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        try:
            return cls(d["label"], d["group"], d["features"], d.get("binary", ()))
        except KeyError as e:
            raise DataError(f"schema missing key {e.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {"label": self.label, "group": self.group,
                "binary": list(self.binary), "features": list(self.features)}


def load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as f:
        return Schema.from_dict(json.load(f))


def load_race_aliases(path=None) -> dict[str, frozenset[str]]:
    """Read the race alias table, ``{"white": [...], "unknown": [...]}``.

    Without a path the bundled table is used.
    """
    if path is None:
        text = resources.files("fairshift").joinpath("race_aliases.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    raw = json.loads(text)
    return {k: frozenset(s.strip().upper() for s in raw.get(k, ())) for k in ("white", "unknown")}


def binarize_race(raw: str, white_aliases: Iterable[str],
                  unknown: Iterable[str] = ()) -> int | None:
    """Map a raw race string to 1 (White) or 0 (Non-White).

    Returns ``None`` for values in ``unknown``; the caller drops such rows.
    Matching is case-insensitive and ignores surrounding whitespace.
    """
    key = str(raw).strip().upper()
    if not key:
        raise ValueError("race value is empty")
    if key in {s.strip().upper() for s in unknown}:
        return None
    return int(key in {s.strip().upper() for s in white_aliases})


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}: non-numeric value {text!r} in column {column!r}") from None
    if not np.isfinite(v):
        raise DataError(f"line {line}: non-finite value {text!r} in column {column!r}")
    return v


def _read_rows(path, delimiter: str) -> tuple[list[str], list[dict[str, str]]]:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f, delimiter=delimiter)
        if reader.fieldnames is None:
            raise DataError(f"{path}: missing header row")
        header = list(reader.fieldnames)
        rows = list(reader)
    return header, rows


def _mapped_columns(schema: Schema) -> list[str]:
    cols = [schema.label, schema.group]
    cols += [c for c in schema.features if c not in cols]
    return cols


def load_csv(path, schema: Schema, delimiter: str = ",") -> Dataset:
    """Load a numeric cohort CSV.

    Rows with an empty cell in any mapped column are dropped; the count ends
    up in ``Dataset.n_dropped``. Any other unparseable cell is an error.
    """
    header, rows = _read_rows(path, delimiter)
    missing = [c for c in _mapped_columns(schema) if c not in header]
    if missing:
        raise DataError(f"columns not in CSV header: {missing}")
    cols = _mapped_columns(schema)
    kept, index, dropped = [], [], 0
    for i, row in enumerate(rows):
        cells = [(row.get(c) or "").strip() for c in cols]
        if any(c == "" for c in cells):
            dropped += 1
            continue
        kept.append([_parse_float(v, c, i + 2) for v, c in zip(cells, cols)])
        index.append(i)
    if not kept:
        raise DataError(f"{path}: no rows left after dropping {dropped} incomplete rows")
    table = np.array(kept)
    pos = {c: j for j, c in enumerate(cols)}
    X = table[:, [pos[c] for c in schema.features]]
    return Dataset(X, table[:, pos[schema.label]], table[:, pos[schema.group]],
                   schema.features, schema.binary, np.array(index), dropped)


def write_csv(d: Dataset, path, label: str = "label", group: str = "race",
              delimiter: str = ",") -> None:
    """Write a Dataset as a cohort CSV; the group column is shared if it is also a feature."""
    names = list(d.feature_names)
    header = [label] + ([group] if group not in names else []) + names
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n):
            vals = {label: int(d.labels[i]), group: int(d.group[i])}
            for j, name in enumerate(names):
                v = d.features[i, j]
                vals[name] = int(v) if name in d.binary else repr(float(v))
            w.writerow([vals[h] for h in header])


def interpercentile_bounds(d: Dataset, low: float, high: float,
                           exempt: Sequence[str] | None = None):
    """Per-feature [q(low), q(high)] over the whole population.

    Exempt columns (binary ones by default) get infinite bounds. Quantiles use
    linear interpolation between order statistics.
    """
    if not 0.0 <= low < high <= 1.0:
        raise ValueError(f"need 0 <= low < high <= 1, got low={low}, high={high}")
    exempt = set(d.binary if exempt is None else exempt)
    q = np.quantile(d.features, [low, high], axis=0, method="linear")
    lo, hi = q[0].copy(), q[1].copy()
    for j, name in enumerate(d.feature_names):
        if name in exempt:
            lo[j], hi[j] = -np.inf, np.inf
    return lo, hi


def apply_bounds(d: Dataset, lo: np.ndarray, hi: np.ndarray) -> Dataset:
    keep = np.all((d.features >= lo) & (d.features <= hi), axis=1)
    if not keep.any():
        raise DataError("interpercentile filter removed every row")
    return replace(d.take(np.flatnonzero(keep)), n_dropped=d.n_dropped + int((~keep).sum()))


def filter_interpercentile(d: Dataset, low: float = 0.02, high: float = 0.98,
                           exempt: Sequence[str] | None = None) -> Dataset:
    """Drop every row with at least one feature outside its [low, high] quantile range."""
    lo, hi = interpercentile_bounds(d, low, high, exempt)
    return apply_bounds(d, lo, hi)


@dataclass(frozen=True, eq=False)
class ScalerParams:
    means: np.ndarray
    stddevs: np.ndarray

    def __post_init__(self):
        mu = np.array(self.means, dtype=np.float64)
        sd = np.array(self.stddevs, dtype=np.float64)
        if mu.shape != sd.shape or mu.ndim != 1:
            raise DataError("means and stddevs must be equal-length vectors")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sd)) and np.all(sd > 0)):
            raise DataError("scaler stddevs must be finite and positive")
        mu.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "stddevs", sd)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stddevs": self.stddevs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(d["means"], d["stddevs"])

    def __eq__(self, other):
        return (isinstance(other, ScalerParams)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.stddevs, other.stddevs))


def standardize(d: Dataset, params: ScalerParams | None = None,
                passthrough: Sequence[str] | None = None) -> tuple[Dataset, ScalerParams]:
    """Z-score the features.

    Without ``params`` the means and sample standard deviations (ddof=1) are
    fitted on ``d``; binary columns (or ``passthrough``) keep mean 0, std 1.
    With ``params`` the given transform is applied unchanged.
    """
    if params is None:
        skip = set(d.binary if passthrough is None else passthrough)
        if d.n < 2:
            raise DataError("need at least 2 rows to fit a scaler")
        mu = d.features.mean(axis=0)
        sd = d.features.std(axis=0, ddof=1)
        for j, name in enumerate(d.feature_names):
            if name in skip:
                mu[j], sd[j] = 0.0, 1.0
            elif not sd[j] > 0:
                raise DataError(f"column {name!r} has zero variance")
        params = ScalerParams(mu, sd)
    elif params.means.shape[0] != d.m:
        raise DataError(f"scaler has {params.means.shape[0]} columns, data has {d.m}")
    return d.with_features((d.features - params.means) / params.stddevs), params


def unstandardize(d: Dataset, params: ScalerParams) -> Dataset:
    return d.with_features(d.features * params.stddevs + params.means)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_ids: np.ndarray
    k: int

    def __post_init__(self):
        ids = np.asarray(self.fold_ids, dtype=np.int64)
        if ids.ndim != 1 or np.any((ids < 0) | (ids >= self.k)):
            raise DataError("fold ids must lie in [0, k)")
        if len(np.unique(ids)) != self.k:
            raise DataError("every fold must be nonempty")
        ids.setflags(write=False)
        object.__setattr__(self, "fold_ids", ids)

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train rows, test rows) for one fold."""
        test = self.fold_ids == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


def stratified_kfold(d: Dataset, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Label-stratified fold ids.

    Each class is shuffled and dealt round-robin; the second class starts
    where the first left off so fold sizes also differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    ids = np.empty(d.n, dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        rows = np.flatnonzero(d.labels == cls)
        if len(rows) < k:
            raise DataError(f"class {cls} has {len(rows)} members, fewer than k={k}")
        rows = rows[rng.permutation(len(rows))]
        ids[rows] = (offset + np.arange(len(rows))) % k
        offset = (offset + len(rows)) % k
    return FoldAssignment(ids, k)


def prepare_csv(in_path, out_path, schema: Schema, aliases: dict | None = None,
                low: float = 0.02, high: float = 0.98,
                race_column: str | None = None, delimiter: str = ",") -> dict:
    """Clean a raw cohort CSV and write it back with the original header order.

    The race column (the schema's group column by default) is mapped to 0/1,
    rows with an unknown race or a missing mapped value are removed, then the
    interpercentile filter runs over the remaining population.
    """
    aliases = load_race_aliases() if aliases is None else aliases
    race_column = race_column or schema.group
    header, rows = _read_rows(in_path, delimiter)
    missing = [c for c in _mapped_columns(schema) + [race_column] if c not in header]
    if missing:
        raise DataError(f"columns not in CSV header: {missing}")
    stats = {"rows_in": len(rows), "race_rejected": 0, "missing_dropped": 0}
    kept = []
    for row in rows:
        raw = (row.get(race_column) or "").strip()
        if not raw:
            stats["missing_dropped"] += 1
            continue
        code = binarize_race(raw, aliases["white"], aliases["unknown"])
        if code is None:
            stats["race_rejected"] += 1
            continue
        row = dict(row)
        row[race_column] = str(code)
        if any(not (row.get(c) or "").strip() for c in _mapped_columns(schema)):
            stats["missing_dropped"] += 1
            continue
        kept.append(row)
    if not kept:
        raise DataError("no rows left after race binarization and missing-value removal")

    cols = _mapped_columns(schema)
    table = np.array([[_parse_float(r[c].strip(), c, i + 2) for c in cols]
                      for i, r in enumerate(kept)])
    pos = {c: j for j, c in enumerate(cols)}
    d = Dataset(table[:, [pos[c] for c in schema.features]], table[:, pos[schema.label]],
                table[:, pos[schema.group]], schema.features, schema.binary)
    filtered = filter_interpercentile(d, low, high)
    stats["percentile_dropped"] = d.n - filtered.n
    stats["rows_out"] = filtered.n

    with open(out_path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=header, delimiter=delimiter, lineterminator="\n")
        w.writeheader()
        for i in filtered.index:
            w.writerow(kept[i])
    return stats
