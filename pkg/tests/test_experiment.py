import json

import numpy as np
import pytest

from fairshift.data import DataError, Dataset, standardize
from fairshift.experiment import ExperimentConfig, evaluate, fit_fold, run_experiment
from fairshift.logistic import TrainConfig
from fairshift.synth import Disparity, default_cohort_spec, generate_synthetic
from fairshift.transfer import FairTransferConfig

from conftest import make_dataset

FAST = ExperimentConfig(k=3, repetitions=3, master_seed=5)


@pytest.fixture(scope="module")
def cohort():
    return make_dataset(n=300, m=4, seed=21)


class TestFitFold:
    def test_leakage_guard(self, cohort):
        train = np.arange(0, 200)
        test = np.arange(200, 300)
        a = fit_fold(cohort, train, test, FAST)
        y = cohort.labels.copy()
        y[test] = 1 - y[test]
        b = fit_fold(cohort.with_labels(y), train, test, FAST)
        assert a.scaler == b.scaler
        assert a.perf.threshold == b.perf.threshold and a.fair.threshold == b.fair.threshold
        assert a.tpr_anchor == b.tpr_anchor
        np.testing.assert_array_equal(a.fair.coefficients, b.fair.coefficients)

    def test_scaler_fitted_on_train_only(self, cohort):
        train, test = np.arange(150), np.arange(150, 300)
        r = fit_fold(cohort, train, test, FAST)
        _, p = standardize(cohort.take(train))
        assert r.scaler == p
        assert r.n_train == 150 and r.n_test == 150

    def test_evaluate_keys(self, cohort):
        r = fit_fold(cohort, np.arange(200), np.arange(200, 300), FAST)
        m = evaluate(r.perf, standardize(cohort.take(np.arange(200, 300)), r.scaler)[0])
        assert m == r.perf_metrics
        assert 0.5 < m["auc"] <= 1.0


class TestRunExperiment:
    def test_deterministic_and_thread_free(self, cohort):
        a = run_experiment(cohort, FAST, threads=1).to_json()
        b = run_experiment(cohort, FAST, threads=3).to_json()
        assert a == b

    def test_report_contents(self, cohort, tmp_path):
        rep = run_experiment(cohort, FAST, threads=1)
        assert len(rep.folds) == 3 and rep.skipped_folds == []
        d = json.loads(rep.to_json())
        assert d["schema_version"] == "1.0"
        assert set(d["aggregate"]) == {"perf", "fair"}
        np.testing.assert_allclose(d["fairness_improvement"]["per_fold"],
                                   rep.metric("fair", "eod_sq") - rep.metric("perf", "eod_sq"))
        paths = rep.write(tmp_path)
        assert {p.split("/")[-1] for p in paths} == {"experiment.json", "metrics.csv",
                                                      "importance.csv", "coefficients.csv"}
        rows = (tmp_path / "metrics.csv").read_text().splitlines()
        assert len(rows) == 1 + 2 * 3 + 2

    def test_fold_seeds_differ(self, cohort):
        rep = run_experiment(cohort, FAST, threads=1)
        seeds = [f.importance.master_seed for f in rep.folds]
        assert len(set(seeds)) == 3

    def test_hand_traced_two_fold(self):
        X = np.array([[0.1], [0.9], [0.4], [1.3], [-0.2], [0.7], [-1.0], [1.8]])
        y = np.array([0, 1, 0, 1, 0, 1, 0, 1])
        z = np.array([1, 1, 0, 0, 1, 0, 0, 1])
        d = Dataset(X, y, z, ("a",))
        cfg = ExperimentConfig(k=2, repetitions=2, master_seed=0,
                               transfer=FairTransferConfig(max_epochs=0))
        rep = run_experiment(d, cfg, threads=1)
        assert rep.skipped_folds == [] and len(rep.folds) == 2
        f0 = rep.folds[0]
        # seed 0 puts rows 2, 3, 4, 7 in fold 0; training rows are 0, 1, 5, 6
        assert f0.scaler.means[0] == pytest.approx(0.175, abs=1e-15)
        assert f0.scaler.stddevs[0] == pytest.approx(np.sqrt(2.1875 / 3), abs=1e-15)
        for fr in rep.folds:
            assert fr.n_train == 4 and fr.n_test == 4
            assert fr.perf.coefficients[0] > 0
            # both test folds are separable by x alone
            assert fr.perf_metrics["auc"] == 1.0
            # zero epochs: the fair model is the performance model
            assert fr.fairness_improvement == 0.0

    def test_too_many_degenerate_folds(self):
        X = np.arange(12.0)[:, None]
        y = np.array([0, 1] * 6)
        z = np.array([1] * 11 + [0])
        with pytest.raises(DataError):
            run_experiment(Dataset(X, y, z, ("a",)), ExperimentConfig(k=3, repetitions=1), 1)

    def test_config_round_trip(self):
        cfg = ExperimentConfig(k=4, train=TrainConfig(l2_penalty=0.1),
                               transfer=FairTransferConfig(epsilon=0.05))
        assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


@pytest.fixture(scope="module")
def reports():
    cfg = ExperimentConfig(k=5, repetitions=0, master_seed=1)
    fair = generate_synthetic(default_cohort_spec(10000, seed=3))
    biased = generate_synthetic(default_cohort_spec(
        10000, Disparity("label_noise", 0, flip_rate=0.3), seed=3))
    return run_experiment(fair, cfg, threads=1), run_experiment(biased, cfg, threads=1)


class TestSyntheticProtocol:
    def test_fair_cohort_changes_little(self, reports):
        rep, _ = reports
        assert abs(rep.fairness_improvements.mean()) < 0.01
        assert abs(rep.metric("fair", "auc").mean() - rep.metric("perf", "auc").mean()) <= 0.02

    def test_biased_cohort_direction(self, reports):
        _, rep = reports
        better = rep.metric("fair", "eod_sq") < rep.metric("perf", "eod_sq")
        assert better.sum() >= 4
        assert rep.metric("fair", "auc").mean() <= rep.metric("perf", "auc").mean() + 0.01

    def test_aggregate_is_exact_mean(self, reports):
        _, rep = reports
        agg = rep.aggregate()
        for model in ("perf", "fair"):
            for key in ("auc", "eod_sq", "eod_reported"):
                assert agg[model][key]["mean"] == float(np.mean(rep.metric(model, key)))
