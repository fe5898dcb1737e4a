"""Which features drive the fairness gain? Permutation importance and linear SHAP.

Run with ``python demos/04_feature_importance.py``.
"""

# %% Train the model pair on one fold, explain on the held-out rows
import numpy as np

from fairshift import (Disparity, ExperimentConfig, default_cohort_spec, fit_fold,
                       generate_synthetic, predictive_importance, standardize, stratified_kfold)

d = generate_synthetic(default_cohort_spec(10000, Disparity("label_noise", 0, flip_rate=0.3),
                                           seed=42))
train, test = stratified_kfold(d, 5, seed=0).split(0)
fold = fit_fold(d, train, test, ExperimentConfig(repetitions=50), importance_seed=0, threads=None)

# %% Fairness importance: F on data with one column shuffled, averaged over repetitions.
# A large |delta| means the feature matters for the fairness difference.
imp = fold.importance
print(f"baseline F = {imp.baseline:+.4f}")
for name, mean, std, rank in imp.rows()[:6]:
    print(f"  {rank:2d} {name:12s} delta {mean:+.4f} +- {std:.4f}")

# %% Classic predictive importance for the performance model, for contrast
test_scaled, _ = standardize(d.take(test), fold.scaler)
pred = predictive_importance(test_scaled.features, test_scaled.labels, fold.perf, "auc", 20, 0)
print("AUC loss when shuffled:", ", ".join(f"{n} {m:.3f}" for n, m, _, _ in pred.rows()[:5]))

# %% SHAP on the log-odds scale is exact for a linear model
for label, shap in (("perf", fold.shap_perf), ("fair", fold.shap_fair)):
    order = np.argsort(shap.rank)[:5]
    print(f"{label} mean |SHAP|:", ", ".join(f"{shap.feature_names[j]} {shap.mean_abs[j]:.3f}"
                                              for j in order))
