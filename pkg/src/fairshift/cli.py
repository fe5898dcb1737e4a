"""``fairshift`` command line.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 fair transfer did not improve fairness within the TPR band.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .data import (DataError, Dataset, Schema, load_csv, load_race_aliases, prepare_csv,
                   standardize, write_csv)
from .experiment import SCHEMA_VERSION, ExperimentConfig, evaluate, run_experiment
from .fairness import DegenerateCellError, eod_squared
from .importance import fairness_importance, linear_shap, predictive_importance
from .logistic import (ModelWeights, TrainConfig, TrainingDiverged, classify, predict_proba,
                       train_performance_model)
from .roc import er_threshold, roc_curve
from .synth import CohortSpec, Disparity, default_cohort_spec, generate_synthetic
from .transfer import FairTransferConfig, train_fair_model

logger = logging.getLogger("fairshift")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NOT_IMPROVING = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _sha256(path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _manifest(command: str, config_path, inputs, seed) -> dict:
    # timestamp only from SOURCE_DATE_EPOCH so reruns stay byte-identical
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    return {
        "command": command,
        "config_hash": None if config_path is None else _sha256(config_path),
        "input_hashes": {str(p): _sha256(p) for p in inputs if p is not None},
        "master_seed": seed,
        "tool_version": __version__,
        "timestamp": None if epoch is None else int(epoch),
    }


def _dump(obj: dict, path) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _config(args) -> dict:
    return {} if args.config is None else _load_json(args.config)


def _schema(cfg: dict) -> Schema:
    if "schema" not in cfg:
        raise UsageError("config needs a 'schema' block (label, group, features, binary)")
    return Schema.from_dict(cfg["schema"])


def _load_data(args, cfg) -> Dataset:
    return load_csv(args.data, _schema(cfg), cfg.get("delimiter", ","))


def _train_cfg(cfg: dict, seed) -> TrainConfig:
    tc = TrainConfig.from_dict(cfg.get("train", {}))
    return tc if seed is None else replace(tc, seed=seed)


def _transfer_cfg(cfg: dict, seed) -> FairTransferConfig:
    fc = FairTransferConfig.from_dict(cfg.get("transfer", {}))
    return fc if seed is None else replace(fc, seed=seed)


def _load_model(path) -> ModelWeights:
    return ModelWeights.from_dict(_load_json(path))


def _scaled(d: Dataset, model: ModelWeights) -> Dataset:
    if model.feature_names != d.feature_names:
        raise DataError("model features do not match the data columns")
    if model.scaler is None:
        return d
    return standardize(d, model.scaler)[0]


def cmd_prepare(args) -> int:
    cfg = _config(args)
    aliases = load_race_aliases(args.aliases or cfg.get("race_aliases"))
    filt = cfg.get("filter", {})
    low = args.low if args.low is not None else filt.get("low", 0.02)
    high = args.high if args.high is not None else filt.get("high", 0.98)
    stats = prepare_csv(args.data, args.output, _schema(cfg), aliases, low, high,
                        cfg.get("race_column"), cfg.get("delimiter", ","))
    _dump({"schema_version": SCHEMA_VERSION,
           "manifest": _manifest("prepare", args.config, [args.data], None),
           "low": low, "high": high, "stats": stats}, args.output + ".manifest.json")
    print(json.dumps(stats))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        spec = CohortSpec.from_dict(_load_json(args.spec))
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    else:
        dis = {"none": Disparity(),
               "label_noise": Disparity("label_noise", 0, flip_rate=args.flip_rate),
               "feature_shift": Disparity("feature_shift", 0, feature=args.shift_feature,
                                          delta=args.shift_delta)}[args.preset]
        spec = default_cohort_spec(args.n, dis, args.seed or 0)
    d = generate_synthetic(spec)
    write_csv(d, args.output, label="died", group=spec.group_feature or "race")
    _dump({"schema_version": SCHEMA_VERSION,
           "manifest": _manifest("synth", None, [args.spec], spec.seed),
           "spec": spec.to_dict(),
           "schema": {"label": "died", "group": spec.group_feature or "race",
                      "features": list(d.feature_names), "binary": list(d.binary)}},
          args.output + ".manifest.json")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    d = _load_data(args, cfg)
    scaled, scaler = standardize(d)
    model = train_performance_model(scaled, _train_cfg(cfg, args.seed))
    t = er_threshold(roc_curve(predict_proba(model, scaled.features), scaled.labels))
    model = replace(model, threshold=t, scaler=scaler,
                    meta={**model.meta, "manifest": _manifest("train", args.config, [args.data],
                                                              args.seed)})
    _dump(model.to_dict(), args.output)
    return EXIT_OK


def cmd_transfer(args) -> int:
    cfg = _config(args)
    perf = _load_model(args.model)
    d = _scaled(_load_data(args, cfg), perf)
    result = train_fair_model(d, perf, _transfer_cfg(cfg, args.seed))
    manifest = _manifest("transfer", args.config, [args.data, args.model], args.seed)
    fair = replace(result.model, meta={**result.model.meta, "manifest": manifest})
    _dump(fair.to_dict(), args.output)
    _dump({"schema_version": SCHEMA_VERSION, "manifest": manifest,
           "fairness_improvement": result.fair_metrics.eod_sq - result.perf_metrics.eod_sq,
           "improving": result.improving, "eod_improved": result.eod_improved,
           "tpr_in_band": result.tpr_in_band, "tpr_anchor": result.tpr_anchor,
           "perf": result.perf_metrics.to_dict(), "fair": result.fair_metrics.to_dict(),
           "coefficient_delta": result.delta.to_dict()},
          os.path.splitext(args.output)[0] + ".delta.json")
    return EXIT_OK if result.improving else EXIT_NOT_IMPROVING


def cmd_audit(args) -> int:
    cfg = _config(args)
    model = _load_model(args.model)
    d = _scaled(_load_data(args, cfg), model)
    out = {"schema_version": SCHEMA_VERSION,
           "manifest": _manifest("audit", args.config, [args.data, args.model], None)}
    if d.labels.min() != d.labels.max():
        out.update(evaluate(model, d))
    else:
        out["fairness"] = eod_squared(classify(model, d.features), d.labels, d.group,
                                      strict=False).to_dict()
    _dump(out, args.output)
    return EXIT_OK


def cmd_importance(args) -> int:
    cfg = _config(args)
    seed = args.seed if args.seed is not None else 0
    if args.mode == "fairness":
        if args.model is not None:
            raise UsageError("--mode fairness takes --model-lg and --model-fair, not --model")
        if args.model_lg is None or args.model_fair is None:
            raise UsageError("--mode fairness needs --model-lg and --model-fair")
        lg, fair = _load_model(args.model_lg), _load_model(args.model_fair)
        if lg.scaler != fair.scaler:
            raise DataError("the two models were fitted with different scalers")
        d = _scaled(_load_data(args, cfg), lg)
        report = fairness_importance(d.features, d.labels, d.group, lg, fair,
                                     args.repetitions, seed, args.threads)
        inputs = [args.data, args.model_lg, args.model_fair]
    else:
        if args.model_lg is not None or args.model_fair is not None:
            raise UsageError(f"--mode {args.mode} takes --model only")
        if args.model is None:
            raise UsageError(f"--mode {args.mode} needs --model")
        model = _load_model(args.model)
        d = _scaled(_load_data(args, cfg), model)
        if args.mode == "predictive":
            report = predictive_importance(d.features, d.labels, model, args.metric,
                                           args.repetitions, seed, args.threads)
        else:
            report = linear_shap(model, d.features, d.features)
        inputs = [args.data, args.model]
    out = report.to_dict()
    out["schema_version"] = SCHEMA_VERSION
    out["manifest"] = _manifest(f"importance:{args.mode}", args.config, inputs, seed)
    _dump(out, args.output)
    report.to_csv(os.path.splitext(args.output)[0] + ".csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    d = _load_data(args, cfg)
    exp = dict(cfg.get("experiment", {}))
    exp["train"] = cfg.get("train", {})
    exp["transfer"] = cfg.get("transfer", {})
    if args.seed is not None:
        exp["master_seed"] = args.seed
    if args.repetitions is not None:
        exp["repetitions"] = args.repetitions
    if args.k is not None:
        exp["k"] = args.k
    ecfg = ExperimentConfig.from_dict(exp)
    manifest = _manifest("experiment", args.config, [args.data], ecfg.master_seed)
    report = run_experiment(d, ecfg, threads=args.threads, manifest=manifest)
    report.write(args.outdir)
    agg = report.aggregate()
    print(json.dumps({m: {k: round(agg[m][k]["mean"], 4) for k in ("auc", "acc", "eod_sq")}
                      for m in agg}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairshift", description="Fairness-aware transfer of logistic mortality models.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True, config=True):
        if data:
            sp.add_argument("--data", required=True, help="cohort CSV")
        if config:
            sp.add_argument("--config", help="JSON config (schema, train, transfer, ...)")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("prepare", help="binarize race, drop incomplete rows, percentile filter")
    common(sp)
    sp.add_argument("--output", required=True)
    sp.add_argument("--aliases", help="race alias JSON; defaults to the bundled table")
    sp.add_argument("--low", type=float)
    sp.add_argument("--high", type=float)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("synth", help="generate a synthetic cohort CSV")
    common(sp, data=False, config=False)
    sp.add_argument("--spec", help="CohortSpec JSON; overrides the preset")
    sp.add_argument("--preset", choices=("none", "label_noise", "feature_shift"), default="none")
    sp.add_argument("--n", type=int, default=10_000)
    sp.add_argument("--flip-rate", type=float, default=0.3)
    sp.add_argument("--shift-feature", default="sofa")
    sp.add_argument("--shift-delta", type=float, default=6.0)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="fit the performance model and its ER threshold")
    common(sp)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("transfer", help="fine-tune a performance model for equalized odds")
    common(sp)
    sp.add_argument("--model", required=True, help="performance model JSON")
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("audit", help="fairness metrics of a model on a dataset")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("importance", help="permutation or SHAP feature importance")
    common(sp)
    sp.add_argument("--mode", choices=("fairness", "predictive", "shap"), default="fairness")
    sp.add_argument("--model", help="model JSON (predictive, shap)")
    sp.add_argument("--model-lg", help="performance model JSON (fairness)")
    sp.add_argument("--model-fair", help="fair model JSON (fairness)")
    sp.add_argument("--metric", choices=("auc", "acc"), default="auc")
    sp.add_argument("--repetitions", type=int, default=100)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--output", required=True)
    sp.set_defaults(func=cmd_importance)

    sp = sub.add_parser("experiment", help="full cross-validated protocol")
    common(sp)
    sp.add_argument("--k", type=int)
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--outdir", required=True)
    sp.set_defaults(func=cmd_experiment)
    return p


def dispatch(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"fairshift {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"fairshift {args.command}: no such file: {e.filename}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, DegenerateCellError, TrainingDiverged, ValueError, KeyError) as e:
        print(f"fairshift {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(dispatch())
