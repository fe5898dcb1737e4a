"""Preparing a cohort: race binarization, percentile filtering, scaling, folds.

Run with ``python demos/01_cohort_preparation.py``.
"""

# %% A raw extract with free-text race and a few gaps
import csv
import tempfile
from pathlib import Path

import numpy as np

from fairshift import (Schema, filter_interpercentile, load_csv, prepare_csv, standardize,
                       stratified_kfold)

tmp = Path(tempfile.mkdtemp())
rng = np.random.default_rng(0)
races = ["WHITE", "WHITE - RUSSIAN", "BLACK/AFRICAN AMERICAN", "ASIAN", "UNKNOWN",
         "HISPANIC/LATINO - PUERTO RICAN"]
with open(tmp / "raw.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["stay_id", "died", "age", "lactate", "race"])
    for i in range(500):
        lactate = "" if i % 50 == 0 else f"{rng.lognormal(0.6, 0.5):.2f}"
        w.writerow([i, int(rng.random() < 0.17), int(rng.normal(66, 15)), lactate,
                    races[rng.integers(len(races))]])

# %% Clean it: unknown race is dropped, rows with missing values are dropped,
# and anything outside the 2nd-98th percentile on a continuous column goes.
schema = Schema(label="died", group="race", features=("age", "lactate"))
stats = prepare_csv(tmp / "raw.csv", tmp / "clean.csv", schema)
print("cleaning:", stats)

d = load_csv(tmp / "clean.csv", schema)
print(f"{d.n} rows, {int((d.group == 0).sum())} Non-White, mortality {d.labels.mean():.3f}")

# %% The filter is a fixed point once bounds are frozen
again = filter_interpercentile(d, 0.0, 1.0)
print("re-filter at [0, 1] keeps every row:", again.n == d.n)

# %% Folds are label-stratified; the scaler is fitted on training rows only
folds = stratified_kfold(d, k=5, seed=0)
for k in range(5):
    train, test = folds.split(k)
    scaled_train, params = standardize(d.take(train))
    scaled_test, _ = standardize(d.take(test), params)
    print(f"fold {k}: train {len(train)} (pos {d.labels[train].mean():.3f}), "
          f"test {len(test)} (pos {d.labels[test].mean():.3f}), "
          f"age mean {params.means[0]:.2f} sd {params.stddevs[0]:.2f}")
