"""Fairness-aware transfer of logistic mortality models and fairness feature importance."""

__version__ = "0.1.0"

from .data import (DataError, Dataset, FoldAssignment, ScalerParams, Schema, binarize_race,
                   filter_interpercentile, interpercentile_bounds, load_csv, load_race_aliases,
                   load_schema, prepare_csv, standardize, stratified_kfold, unstandardize, write_csv)
from .experiment import ExperimentConfig, ExperimentReport, evaluate, fit_fold, run_experiment
from .fairness import (DegenerateCellError, FairnessMetrics, GroupRates, eod_squared,
                       fairness_improvement, group_rates)
from .importance import (ImportanceReport, ShapReport, fairness_importance, linear_shap,
                         permute_column, predictive_importance)
from .logistic import (ModelWeights, TrainConfig, TrainingDiverged, bce_gradient, bce_loss,
                       classify, predict_proba, sigmoid, train_performance_model)
from .roc import RocCurve, auc, er_point, er_threshold, roc_auc, roc_curve
from .synth import (CohortSpec, Disparity, FeatureSpec, default_cohort_spec, generate_synthetic)
from .transfer import (CoefficientDelta, FairTransferConfig, NonImprovingTransfer, TransferResult,
                       coefficient_delta, soft_fair_loss, train_fair_model)
