"""The performance model: logistic regression by gradient descent and the ER threshold.

Run with ``python demos/02_performance_model.py``.
"""

# %% Synthetic cohort shaped like an ICU sepsis extract
from dataclasses import replace

from fairshift import (classify, default_cohort_spec, er_threshold, generate_synthetic,
                       predict_proba, roc_auc, roc_curve, standardize, train_performance_model)

d = generate_synthetic(default_cohort_spec(n=5000, seed=1))
d, scaler = standardize(d)
print(f"{d.n} rows x {d.m} features, mortality {d.labels.mean():.3f}")

# %% Fit from zero weights; the step size defaults to 1/L
model = train_performance_model(d)
print("converged:", model.meta["converged"], "after", model.meta["epochs_run"], "epochs")
print(f"loss {model.meta['initial_loss']:.1f} -> {model.meta['final_loss']:.1f}")
for name, c in sorted(zip(d.feature_names, model.coefficients), key=lambda t: -abs(t[1]))[:5]:
    print(f"  {name:12s} {c:+.3f}")

# %% ROC curve and the point closest to (0, 1)
p = predict_proba(model, d.features)
curve = roc_curve(p, d.labels)
t = er_threshold(curve)
model = model.with_threshold(t)
pred = classify(model, d.features)
print(f"AUC {roc_auc(p, d.labels):.4f}; ER threshold {t:.4f}; "
      f"TPR {pred[d.labels == 1].mean():.3f}, FPR {pred[d.labels == 0].mean():.3f}")

# %% Models serialize to JSON, scaler included
model = replace(model, scaler=scaler)
print(model.to_json()[:200], "...")
