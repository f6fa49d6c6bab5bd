"""Metrics against a brute-force counting oracle, fold-partition
properties, aggregation arithmetic, and small end-to-end case studies."""

import json

import numpy as np
import pytest

from conftest import make_random_recording
from csiarm.core import ActionClass, ALL_ACTIONS, LengthMismatch
from csiarm.evaluation import (
    CLASS_NAMES,
    ConfusionMatrix,
    EmptyInput,
    FoldAggregate,
    MetricsReport,
    MissingCell,
    MissingScenario,
    TooFewSamples,
    aggregate_folds,
    compute_metrics,
    leave_one_scenario_out,
    pool_scenarios,
    run_case_study,
    stratified_kfold,
)
from csiarm.nn.model import ModelConfig
from csiarm.nn.train import TrainConfig
from csiarm.pipeline import LabeledDataset


# --- brute-force oracle --------------------------------------------------------


def brute_force_metrics(preds, truths, n_classes=4):
    """Per-class P/R/F1 and accuracy (percent) by explicit counting."""
    pairs = list(zip(preds, truths))
    per_class = []
    for c in range(n_classes):
        tp = sum(1 for p, t in pairs if p == c and t == c)
        fp = sum(1 for p, t in pairs if p == c and t != c)
        fn = sum(1 for p, t in pairs if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per_class.append((prec * 100, rec * 100, f1 * 100))
    acc = sum(1 for p, t in pairs if p == t) / len(pairs) * 100
    return per_class, acc


def test_hand_worked_example():
    # truths: two of class 0, two of class 1; preds: 0, 1, 1, 1
    report, cm = compute_metrics([0, 1, 1, 1], [0, 0, 1, 1])
    assert report.precision[0] == pytest.approx(100.0)
    assert report.recall[0] == pytest.approx(50.0)
    assert report.precision[1] == pytest.approx(200 / 3)
    assert report.recall[1] == pytest.approx(100.0)
    assert report.f1[0] == pytest.approx(200 / 3)
    assert report.f1[1] == pytest.approx(80.0)
    assert report.accuracy == pytest.approx(75.0)
    assert cm.counts[0, 0] == 1 and cm.counts[0, 1] == 1 and cm.counts[1, 1] == 2


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(7)
    for trial in range(60):
        n = int(rng.integers(1, 400))
        truths = rng.integers(0, 4, size=n)
        preds = rng.integers(0, 4, size=n)
        report, cm = compute_metrics(preds, truths)
        per_class, acc = brute_force_metrics(preds, truths)
        for c in range(4):
            assert report.precision[c] == pytest.approx(per_class[c][0], abs=1e-9)
            assert report.recall[c] == pytest.approx(per_class[c][1], abs=1e-9)
            assert report.f1[c] == pytest.approx(per_class[c][2], abs=1e-9)
        assert report.accuracy == pytest.approx(acc, abs=1e-9)
        assert report.macro_precision == pytest.approx(
            np.mean([p[0] for p in per_class]), abs=1e-9
        )
        assert cm.counts.sum() == n


def test_balanced_accuracy_equals_macro_recall_exactly():
    rng = np.random.default_rng(11)
    for trial in range(30):
        per = int(rng.integers(1, 60))
        truths = np.repeat(np.arange(4), per)
        preds = rng.integers(0, 4, size=4 * per)
        report, _ = compute_metrics(preds, truths)
        assert report.accuracy == report.macro_recall  # bit-exact identity


def test_confusion_counts_and_percentages():
    truths = [0, 0, 1, 2, 2, 2, 3, 3]
    preds = [0, 1, 1, 2, 2, 0, 3, 3]
    _, cm = compute_metrics(preds, truths)
    expected = np.zeros((4, 4), dtype=int)
    for p, t in zip(preds, truths):
        expected[t, p] += 1
    assert np.array_equal(cm.counts, expected)
    pct = cm.percentage()
    sums = pct.sum(axis=1)
    assert np.all(np.abs(sums - 100.0) < 0.01)


def test_percentage_zero_row_stays_zero():
    cm = ConfusionMatrix(np.array([[2, 0, 0, 0]] + [[0] * 4] * 3))
    pct = cm.percentage()
    assert pct[0, 0] == 100.0
    assert np.all(pct[1:] == 0.0)


def test_zero_denominator_flags():
    # class 3 never occurs and is never predicted
    report, _ = compute_metrics([0, 1, 2], [0, 1, 2])
    assert "precision[SILENCE]" in report.zero_denominator
    assert "recall[SILENCE]" in report.zero_denominator
    assert "f1[SILENCE]" in report.zero_denominator
    assert report.precision[3] == 0.0 and report.recall[3] == 0.0

    # all classes present and predicted: no flags
    report, _ = compute_metrics([0, 1, 2, 3], [0, 1, 2, 3])
    assert report.zero_denominator == ()
    assert report.accuracy == pytest.approx(100.0)


def test_metrics_input_validation():
    with pytest.raises(EmptyInput):
        compute_metrics([], [])
    with pytest.raises(LengthMismatch):
        compute_metrics([0, 1], [0])
    with pytest.raises(ValueError):
        compute_metrics([0, 4], [0, 1])


def test_text_grid_mentions_classes():
    _, cm = compute_metrics([0, 1, 2, 3], [0, 1, 2, 3])
    grid = cm.text_grid()
    for name in CLASS_NAMES:
        assert name in grid


# --- stratified k-fold ---------------------------------------------------------


def test_kfold_partition_properties():
    y = np.repeat(np.arange(4), 100)
    splits = stratified_kfold(y, k=5, seed=3)
    assert len(splits) == 5
    all_test = np.concatenate([te for _, te in splits])
    assert len(all_test) == 400
    assert len(np.unique(all_test)) == 400  # disjoint and covering
    for tr, te in splits:
        assert len(tr) == 320 and len(te) == 80
        assert len(np.intersect1d(tr, te)) == 0
        counts = np.bincount(y[te], minlength=4)
        assert np.all(counts == 20)  # exactly stratified at 100 per class


def test_kfold_uneven_classes_differ_by_at_most_one():
    y = np.concatenate([np.full(103, 0), np.full(97, 1), np.full(100, 2), np.full(101, 3)])
    splits = stratified_kfold(y, k=5, seed=0)
    for cls, total in ((0, 103), (1, 97), (2, 100), (3, 101)):
        per_fold = [int(np.sum(y[te] == cls)) for _, te in splits]
        assert sum(per_fold) == total
        assert max(per_fold) - min(per_fold) <= 1


def test_kfold_deterministic_and_seed_sensitive():
    y = np.repeat(np.arange(4), 25)
    a = stratified_kfold(y, k=5, seed=9)
    b = stratified_kfold(y, k=5, seed=9)
    c = stratified_kfold(y, k=5, seed=10)
    for (tra, tea), (trb, teb) in zip(a, b):
        assert np.array_equal(tra, trb) and np.array_equal(tea, teb)
    assert any(not np.array_equal(tea, tec) for (_, tea), (_, tec) in zip(a, c))


def test_kfold_rejects_small_k_and_small_classes():
    y = np.repeat(np.arange(4), 10)
    with pytest.raises(TooFewSamples):
        stratified_kfold(y, k=1)
    with pytest.raises(TooFewSamples):
        stratified_kfold(np.array([0, 0, 0, 1, 1, 2, 3] * 1), k=5)  # class 2 has 1


def test_kfold_accepts_dataset_object():
    n = 40
    ds = LabeledDataset(
        X=np.zeros((n, 4, 6), dtype=np.float32),
        y=np.tile(np.arange(4, dtype=np.uint8), n // 4),
        scenario_ids=np.ones(n, dtype=np.uint8),
        los=np.ones(n, dtype=bool),
        window=4,
        stride=4,
    )
    splits = stratified_kfold(ds, k=5, seed=1)
    assert len(splits) == 5 and all(len(te) == 8 for _, te in splits)


# --- leave-one-scenario-out ----------------------------------------------------


def _pooled_dataset(per_scenario=100, scenarios=(1, 2, 3, 4)):
    n = per_scenario * len(scenarios)
    y = np.tile(np.arange(4, dtype=np.uint8), n // 4)
    scen = np.repeat(np.array(scenarios, dtype=np.uint8), per_scenario)
    return LabeledDataset(
        X=np.zeros((n, 4, 6), dtype=np.float32),
        y=y,
        scenario_ids=scen,
        los=np.ones(n, dtype=bool),
        window=4,
        stride=4,
    )


def test_loso_split_sizes_and_no_leakage():
    ds = _pooled_dataset(per_scenario=400)
    splits = leave_one_scenario_out(ds)
    assert len(splits) == 4
    for held, tr, te in splits:
        assert len(tr) == 1200 and len(te) == 400
        assert np.all(ds.scenario_ids[te] == held)
        assert not np.any(ds.scenario_ids[tr] == held)
        assert len(np.intersect1d(tr, te)) == 0


def test_loso_missing_scenario_rejected():
    ds = _pooled_dataset(scenarios=(1, 2, 3))
    with pytest.raises(MissingScenario):
        leave_one_scenario_out(ds)


def test_loso_dict_form():
    parts = {
        s: _pooled_dataset(per_scenario=20, scenarios=(s,)) for s in (1, 2, 3, 4)
    }
    splits = leave_one_scenario_out(parts)
    assert len(splits) == 4
    pooled = pool_scenarios(parts)
    for held, tr, te in splits:
        assert np.all(pooled.scenario_ids[te] == held)
    with pytest.raises(MissingScenario):
        leave_one_scenario_out({1: parts[1], 2: parts[2], 3: parts[3]})


# --- aggregation ---------------------------------------------------------------


def _report(acc, shift=0.0):
    per = np.array([90.0, 80.0, 70.0, 60.0]) + shift
    return MetricsReport(
        precision=per,
        recall=per,
        f1=per,
        accuracy=acc,
        macro_precision=float(per.mean()),
        macro_recall=float(per.mean()),
        macro_f1=float(per.mean()),
    )


def test_aggregate_population_std():
    agg = aggregate_folds([_report(90.0), _report(100.0)])
    assert agg.accuracy_mean == pytest.approx(95.0)
    assert agg.accuracy_std == pytest.approx(5.0)  # population, not sample, std
    assert agg.n_folds == 2


def test_aggregate_per_class_mean_std():
    agg = aggregate_folds([_report(90.0, shift=0.0), _report(90.0, shift=10.0)])
    assert np.allclose(agg.precision_mean, [95.0, 85.0, 75.0, 65.0])
    assert np.allclose(agg.precision_std, [5.0, 5.0, 5.0, 5.0])


def test_aggregate_confusion_average():
    a = ConfusionMatrix(np.diag([2, 2, 2, 2]))
    b_counts = np.diag([1, 2, 2, 2])
    b_counts[0, 2] = 1
    b = ConfusionMatrix(b_counts)
    agg = aggregate_folds([_report(100.0), _report(87.5)], [a, b])
    assert agg.mean_percentage_confusion[0, 0] == pytest.approx(75.0)
    assert agg.mean_percentage_confusion[0, 2] == pytest.approx(25.0)
    assert agg.mean_percentage_confusion[1, 1] == pytest.approx(100.0)


def test_aggregate_rejects_empty_and_mismatched():
    with pytest.raises(EmptyInput):
        aggregate_folds([])
    with pytest.raises(LengthMismatch):
        aggregate_folds([_report(90.0)], [])


def test_aggregate_table_and_csv(tmp_path):
    agg = aggregate_folds([_report(90.0), _report(100.0)])
    table = agg.per_class_table()
    for name in CLASS_NAMES:
        assert name in table
    assert "+-" in table
    path = tmp_path / "metrics.csv"
    agg.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("class,precision_mean")
    assert len(lines) == 1 + 4 + 1  # header, four classes, accuracy row


def test_aggregate_json_round_trip():
    agg = aggregate_folds(
        [_report(90.0), _report(100.0)],
        [ConfusionMatrix(np.diag([1, 1, 1, 1]))] * 2,
    )
    blob = json.dumps(agg.to_dict())
    parsed = json.loads(blob)
    assert parsed["accuracy"]["mean"] == pytest.approx(95.0)
    assert len(parsed["precision"]["mean"]) == 4
    assert parsed["mean_percentage_confusion"][0][0] == pytest.approx(100.0)


# --- case studies (small corpus, small model) ----------------------------------

WINDOW = 20

TINY_MODEL = ModelConfig(
    input_height=WINDOW,
    input_width=234,
    conv_filters=(2, 2, 2),
    dense_units=8,
    dropout=0.0,
    n_classes=4,
    l1=0.0,
    l2=0.0,
    seed=0,
)

TINY_TRAIN = TrainConfig(
    batch_size=8, max_epochs=1, patience=0, optimizer="sgd", learning_rate=0.01, seed=0
)


def _corpus(rng, scenarios=(1,), los_values=(True,), frames=100):
    recs = []
    for s in scenarios:
        for los in los_values:
            for action in ALL_ACTIONS:
                recs.append(
                    make_random_recording(
                        rng, n_frames=frames, label=action, scenario_id=s, los=los
                    )
                )
    return recs


def test_per_scenario_cv_study(rng, tmp_path):
    recs = _corpus(rng, scenarios=(1,))
    result = run_case_study(
        "per-scenario-cv",
        recs,
        model_config=TINY_MODEL,
        train_config=TINY_TRAIN,
        out_dir=tmp_path,
        window=WINDOW,
        stride=WINDOW,
    )
    payload = result.payload
    assert payload["study"] == "per-scenario-cv"
    assert set(payload["scenarios"]) == {"1"}
    block = payload["scenarios"]["1"]
    assert block["aggregate"]["n_folds"] == 5
    assert len(block["folds"]) == 5
    assert (tmp_path / "cv_scenario1.json").exists()
    assert (tmp_path / "cv_scenario1_metrics.csv").exists()
    assert (tmp_path / "cv_scenario1_confusion.txt").exists()
    assert (tmp_path / "cv_summary.json").exists()
    assert payload["metadata"]["protocol"].startswith("stratified-5-fold")
    grid = (tmp_path / "cv_scenario1_confusion.txt").read_text()
    assert "ARC" in grid and "SILENCE" in grid


def test_nlos_comparison_study(rng, tmp_path):
    recs = _corpus(rng, scenarios=(2,), los_values=(True, False))
    result = run_case_study(
        "nlos-comparison",
        recs,
        model_config=TINY_MODEL,
        train_config=TINY_TRAIN,
        out_dir=tmp_path,
        window=WINDOW,
        stride=WINDOW,
    )
    payload = result.payload
    assert set(payload["conditions"]) == {"los", "nlos"}
    for name in ("los", "nlos"):
        assert len(payload["conditions"][name]["per_class_accuracy"]) == 4
    assert "accuracy_drop" in payload
    assert (tmp_path / "nlos_comparison.json").exists()
    assert (tmp_path / "nlos_comparison.csv").exists()
    assert (tmp_path / "nlos_los_confusion.txt").exists()
    assert (tmp_path / "nlos_nlos_confusion.txt").exists()


def test_loso_study(rng, tmp_path):
    recs = _corpus(rng, scenarios=(1, 2, 3, 4))
    result = run_case_study(
        "loso",
        recs,
        model_config=TINY_MODEL,
        train_config=TINY_TRAIN,
        out_dir=tmp_path,
        window=WINDOW,
        stride=WINDOW,
    )
    payload = result.payload
    assert payload["held_out_scenarios"] == [1, 2, 3, 4]
    agg = payload["aggregate"]
    # report shape: four class rows, each with precision/recall/f1 mean and std
    for metric in ("precision", "recall", "f1"):
        assert len(agg[metric]["mean"]) == 4
        assert len(agg[metric]["std"]) == 4
    assert (tmp_path / "loso.json").exists()
    assert (tmp_path / "loso_metrics.csv").exists()
    assert (tmp_path / "loso_confusion.txt").exists()
    assert (tmp_path / "loso_table.txt").exists()
    table = (tmp_path / "loso_table.txt").read_text()
    for name in CLASS_NAMES:
        assert name in table


def test_missing_cell_detection(rng, tmp_path):
    # per-scenario CV: scenario 1 lacks SILENCE
    recs = [
        make_random_recording(rng, n_frames=40, label=a, scenario_id=1, los=True)
        for a in (ActionClass.ARC, ActionClass.ELBOW, ActionClass.CIRCLE)
    ]
    with pytest.raises(MissingCell):
        run_case_study("per-scenario-cv", recs, TINY_MODEL, TINY_TRAIN, window=WINDOW)
    # nlos study: no NLOS recordings at all
    recs = _corpus(rng, scenarios=(2,), los_values=(True,), frames=40)
    with pytest.raises(MissingCell):
        run_case_study("nlos-comparison", recs, TINY_MODEL, TINY_TRAIN, window=WINDOW)
    # loso: scenario 4 absent entirely
    recs = _corpus(rng, scenarios=(1, 2, 3), frames=40)
    with pytest.raises(MissingCell):
        run_case_study("loso", recs, TINY_MODEL, TINY_TRAIN, window=WINDOW)


def test_unknown_study_rejected(rng):
    with pytest.raises(ValueError):
        run_case_study("bogus", [], TINY_MODEL, TINY_TRAIN)
