"""Equalized odds: measuring disparity and transferring into a fairer model.

Run with ``python demos/03_fair_transfer.py``.
"""

# %% A cohort where Non-White outcomes are recorded with 30% label noise
import numpy as np

from fairshift import (Disparity, FairTransferConfig, classify, default_cohort_spec, eod_squared,
                       er_threshold, generate_synthetic, predict_proba, roc_auc, roc_curve,
                       standardize, train_fair_model, train_performance_model)

d = generate_synthetic(default_cohort_spec(10000, Disparity("label_noise", 0, flip_rate=0.3),
                                           seed=42))
d, _ = standardize(d)

perf = train_performance_model(d)
perf = perf.with_threshold(er_threshold(roc_curve(predict_proba(perf, d.features), d.labels)))
m = eod_squared(classify(perf, d.features), d.labels, d.group)
print(f"performance model: TPR gap {m.tpr_diff_abs:.3f}, FPR gap {m.fpr_diff_abs:.3f}, "
      f"eod_sq {m.eod_sq:.4f}, mean-abs eod {m.eod_reported:.4f}")

# %% Start from the performance weights and descend the smooth fairness surrogate.
# The overall TPR must stay within epsilon of where the performance model had it.
result = train_fair_model(d, perf, FairTransferConfig())
f = result.fair_metrics
print(f"fair model:        TPR gap {f.tpr_diff_abs:.3f}, FPR gap {f.fpr_diff_abs:.3f}, "
      f"eod_sq {f.eod_sq:.4f}")
print(f"F = {f.eod_sq - m.eod_sq:+.4f}; overall TPR {f.overall_tpr:.3f} vs anchor "
      f"{result.tpr_anchor:.3f}; improving: {result.improving}")
print(f"AUC {roc_auc(predict_proba(perf, d.features), d.labels):.4f} -> "
      f"{roc_auc(predict_proba(result.model, d.features), d.labels):.4f}")

# %% Which coefficients moved the most
for row in result.delta.sorted_rows()[:5]:
    print(f"  {row['feature']:12s} {row['theta_lg']:+.3f} -> {row['theta_fair']:+.3f} "
          f"({row['delta']:+.3f})")

# %% The surrogate loss over the fine-tune
h = np.array(result.loss_history)
print(f"surrogate loss {h[0]:.4f} -> {h[-1]:.4f} over {result.epochs_run} epochs")
