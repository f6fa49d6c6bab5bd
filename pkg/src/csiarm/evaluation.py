"""Evaluation protocols and reporting: stratified k-fold, leave-one-
scenario-out, precision/recall/F1/accuracy with confusion matrices, fold
aggregation (mean +- population std), and the three case studies."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (
    ALL_ACTIONS,
    ActionClass,
    CsiArmError,
    CsiRecording,
    LengthMismatch,
)
from .pipeline import LabeledDataset, NormStats, apply_normalization, assemble
from .nn.model import CnnModel, ModelConfig, build_model
from .nn.train import TrainConfig, train

CLASS_NAMES = tuple(a.name for a in ALL_ACTIONS)  # ARC, ELBOW, CIRCLE, SILENCE
N_CLASSES = len(ALL_ACTIONS)


class TooFewSamples(CsiArmError):
    """Not enough samples per class for the requested fold count."""


class MissingScenario(CsiArmError):
    """Leave-one-scenario-out requires all four scenarios."""


class EmptyInput(CsiArmError):
    """No data to evaluate or aggregate."""


class MissingCell(CsiArmError):
    """The corpus lacks a (scenario, action, los) cell the study needs."""


# --- confusion matrix ---------------------------------------------------------


@dataclass
class ConfusionMatrix:
    """Counts[i, j] = samples of true class i predicted as class j."""

    counts: np.ndarray
    class_names: Tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.class_names)
        if self.counts.shape != (n, n):
            raise LengthMismatch(f"confusion matrix must be {n}x{n}")
        if np.any(self.counts < 0):
            raise ValueError("negative counts")

    def percentage(self) -> np.ndarray:
        """Each true-class row normalized to sum to 100 (zero rows stay 0)."""
        counts = self.counts.astype(np.float64)
        sums = counts.sum(axis=1, keepdims=True)
        out = np.divide(counts * 100.0, sums, out=np.zeros_like(counts), where=sums > 0)
        return out

    def text_grid(self, percent: bool = True) -> str:
        data = self.percentage() if percent else self.counts
        width = max(8, max(len(n) for n in self.class_names) + 2)
        head = "true\\pred".ljust(width) + "".join(n.rjust(width) for n in self.class_names)
        lines = [head]
        for i, name in enumerate(self.class_names):
            cells = "".join(
                (f"{data[i, j]:>{width}.2f}" if percent else f"{data[i, j]:>{width}d}")
                for j in range(len(self.class_names))
            )
            lines.append(name.ljust(width) + cells)
        return "\n".join(lines)


# --- metrics -----------------------------------------------------------------


@dataclass
class MetricsReport:
    """Per-class and macro precision/recall/F1 plus accuracy, in percent."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    class_names: Tuple[str, ...] = CLASS_NAMES
    zero_denominator: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
            "f1": [float(v) for v in self.f1],
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "zero_denominator": list(self.zero_denominator),
        }


def compute_metrics(
    preds: Sequence[int], truths: Sequence[int], n_classes: int = N_CLASSES
) -> Tuple[MetricsReport, ConfusionMatrix]:
    """Counting metrics over two equal-length label sequences.

    Zero-denominator cells (class never predicted / never present / P+R=0)
    are reported as 0 and named in `zero_denominator`.
    """
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape or preds.ndim != 1:
        raise LengthMismatch(f"preds {preds.shape} vs truths {truths.shape}")
    if len(preds) == 0:
        raise EmptyInput("no predictions to score")
    if np.any((preds < 0) | (preds >= n_classes) | (truths < 0) | (truths >= n_classes)):
        raise ValueError(f"labels outside [0, {n_classes})")

    names = CLASS_NAMES if n_classes == N_CLASSES else tuple(str(i) for i in range(n_classes))
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    cm = ConfusionMatrix(counts=counts, class_names=names)

    tp = np.diag(counts).astype(np.float64)
    pred_totals = counts.sum(axis=0).astype(np.float64)
    true_totals = counts.sum(axis=1).astype(np.float64)

    flags: List[str] = []
    precision = np.zeros(n_classes)
    recall = np.zeros(n_classes)
    f1 = np.zeros(n_classes)
    for c in range(n_classes):
        if pred_totals[c] > 0:
            precision[c] = tp[c] / pred_totals[c]
        else:
            flags.append(f"precision[{names[c]}]")
        if true_totals[c] > 0:
            recall[c] = tp[c] / true_totals[c]
        else:
            flags.append(f"recall[{names[c]}]")
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])
        else:
            flags.append(f"f1[{names[c]}]")

    macro_recall = float(np.mean(recall))
    balanced = np.all(true_totals == true_totals[0]) and true_totals[0] > 0
    if balanced:
        # for exactly balanced truths, accuracy and macro recall are the
        # same quantity; evaluating both through one expression keeps the
        # identity exact in floating point
        acc = macro_recall
    else:
        acc = float(tp.sum() / len(preds))

    report = MetricsReport(
        precision=precision * 100.0,
        recall=recall * 100.0,
        f1=f1 * 100.0,
        accuracy=acc * 100.0,
        macro_precision=float(np.mean(precision)) * 100.0,
        macro_recall=macro_recall * 100.0,
        macro_f1=float(np.mean(f1)) * 100.0,
        class_names=names,
        zero_denominator=tuple(flags),
    )
    return report, cm


@dataclass
class FoldAggregate:
    """Mean +- population std of metrics across folds, plus the averaged
    percentage confusion matrix."""

    n_folds: int
    class_names: Tuple[str, ...]
    precision_mean: np.ndarray
    precision_std: np.ndarray
    recall_mean: np.ndarray
    recall_std: np.ndarray
    f1_mean: np.ndarray
    f1_std: np.ndarray
    accuracy_mean: float
    accuracy_std: float
    macro_precision_mean: float
    macro_precision_std: float
    macro_recall_mean: float
    macro_recall_std: float
    macro_f1_mean: float
    macro_f1_std: float
    mean_percentage_confusion: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        d = {
            "n_folds": self.n_folds,
            "class_names": list(self.class_names),
            "accuracy": {"mean": self.accuracy_mean, "std": self.accuracy_std},
        }
        for metric in ("precision", "recall", "f1"):
            d[metric] = {
                "mean": [float(v) for v in getattr(self, f"{metric}_mean")],
                "std": [float(v) for v in getattr(self, f"{metric}_std")],
            }
            d[f"macro_{metric}"] = {
                "mean": getattr(self, f"macro_{metric}_mean"),
                "std": getattr(self, f"macro_{metric}_std"),
            }
        if self.mean_percentage_confusion is not None:
            d["mean_percentage_confusion"] = [
                [float(v) for v in row] for row in self.mean_percentage_confusion
            ]
        return d

    def per_class_table(self) -> str:
        """Class rows x (precision, recall, f1) columns, mean +- std."""
        lines = ["class      precision            recall               f1"]
        for i, name in enumerate(self.class_names):
            lines.append(
                f"{name:<10}"
                f"{self.precision_mean[i]:6.2f} +- {self.precision_std[i]:5.2f}    "
                f"{self.recall_mean[i]:6.2f} +- {self.recall_std[i]:5.2f}    "
                f"{self.f1_mean[i]:6.2f} +- {self.f1_std[i]:5.2f}"
            )
        lines.append(
            f"{'accuracy':<10}{self.accuracy_mean:6.2f} +- {self.accuracy_std:5.2f}"
        )
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(
                "class,precision_mean,precision_std,recall_mean,recall_std,"
                "f1_mean,f1_std\n"
            )
            for i, name in enumerate(self.class_names):
                fh.write(
                    f"{name},{self.precision_mean[i]!r},{self.precision_std[i]!r},"
                    f"{self.recall_mean[i]!r},{self.recall_std[i]!r},"
                    f"{self.f1_mean[i]!r},{self.f1_std[i]!r}\n"
                )
            fh.write(
                f"__accuracy__,{self.accuracy_mean!r},{self.accuracy_std!r},,,,\n"
            )


def aggregate_folds(
    reports: Sequence[MetricsReport],
    matrices: Optional[Sequence[ConfusionMatrix]] = None,
) -> FoldAggregate:
    """Mean and population std across folds; confusion matrices are
    converted to row percentages per fold, then averaged elementwise."""
    if not reports:
        raise EmptyInput("no fold reports")
    names = reports[0].class_names
    if any(r.class_names != names for r in reports):
        raise ValueError("fold reports disagree on class sets")

    def stack(attr):
        return np.stack([np.asarray(getattr(r, attr), dtype=np.float64) for r in reports])

    prec, rec, f1 = stack("precision"), stack("recall"), stack("f1")
    acc = np.array([r.accuracy for r in reports])
    macro_p = np.array([r.macro_precision for r in reports])
    macro_r = np.array([r.macro_recall for r in reports])
    macro_f = np.array([r.macro_f1 for r in reports])

    mean_cm = None
    if matrices is not None:
        if len(matrices) != len(reports):
            raise LengthMismatch("one confusion matrix per report required")
        mean_cm = np.mean([m.percentage() for m in matrices], axis=0)

    return FoldAggregate(
        n_folds=len(reports),
        class_names=names,
        precision_mean=prec.mean(axis=0),
        precision_std=prec.std(axis=0),
        recall_mean=rec.mean(axis=0),
        recall_std=rec.std(axis=0),
        f1_mean=f1.mean(axis=0),
        f1_std=f1.std(axis=0),
        accuracy_mean=float(acc.mean()),
        accuracy_std=float(acc.std()),
        macro_precision_mean=float(macro_p.mean()),
        macro_precision_std=float(macro_p.std()),
        macro_recall_mean=float(macro_r.mean()),
        macro_recall_std=float(macro_r.std()),
        macro_f1_mean=float(macro_f.mean()),
        macro_f1_std=float(macro_f.std()),
        mean_percentage_confusion=mean_cm,
    )


# --- splits -------------------------------------------------------------------


def stratified_kfold(
    ds_or_labels: Union[LabeledDataset, np.ndarray], k: int = 5, seed: int = 0
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """k disjoint covering folds with per-class counts differing by <= 1.

    Returns (train_indices, test_indices) per fold, deterministic in seed.
    """
    y = ds_or_labels.y if isinstance(ds_or_labels, LabeledDataset) else np.asarray(ds_or_labels)
    if k < 2:
        raise TooFewSamples(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    test_folds: List[List[np.ndarray]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise TooFewSamples(f"class {cls} has {len(idx)} samples < k={k}")
        idx = idx[rng.permutation(len(idx))]
        for fold, chunk in enumerate(np.array_split(idx, k)):
            test_folds[fold].append(chunk)
    all_idx = np.arange(len(y))
    splits = []
    for fold in range(k):
        test = np.sort(np.concatenate(test_folds[fold]))
        train = np.setdiff1d(all_idx, test, assume_unique=True)
        splits.append((train, test))
    return splits


def leave_one_scenario_out(
    corpora: Union[Dict[int, LabeledDataset], LabeledDataset],
    scenarios: Sequence[int] = (1, 2, 3, 4),
) -> List[Tuple[int, np.ndarray, np.ndarray]]:
    """One split per scenario: train on the other scenarios, test on it.

    Accepts either a pooled LabeledDataset (split on its scenario_ids) or a
    dict {scenario: dataset} (pooled internally in scenario order).
    Returns (held_out_scenario, train_indices, test_indices) triples over
    the pooled dataset; use `pool_scenarios` to obtain that dataset for the
    dict form.
    """
    if isinstance(corpora, dict):
        missing = [s for s in scenarios if s not in corpora]
        if missing:
            raise MissingScenario(f"scenarios absent: {missing}")
        ds = pool_scenarios(corpora, scenarios)
    else:
        ds = corpora
    present = set(np.unique(ds.scenario_ids).tolist())
    missing = [s for s in scenarios if s not in present]
    if missing:
        raise MissingScenario(f"scenarios absent: {missing}")

    splits = []
    for s in scenarios:
        test = np.flatnonzero(ds.scenario_ids == s)
        train = np.flatnonzero(ds.scenario_ids != s)
        assert not np.any(ds.scenario_ids[train] == s)
        splits.append((s, train, test))
    return splits


def pool_scenarios(
    corpora: Dict[int, LabeledDataset], scenarios: Sequence[int] = (1, 2, 3, 4)
) -> LabeledDataset:
    parts = [corpora[s] for s in scenarios]
    return LabeledDataset(
        X=np.concatenate([p.X for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        scenario_ids=np.concatenate([p.scenario_ids for p in parts]),
        los=np.concatenate([p.los for p in parts]),
        window=parts[0].window,
        stride=parts[0].stride,
    )


# --- case studies ---------------------------------------------------------------


@dataclass
class CaseStudyResult:
    study: str
    payload: dict
    files: List[Path] = field(default_factory=list)


def _fit_fold_normalization(
    train_X: np.ndarray, test_X: np.ndarray, mode: str
) -> Tuple[np.ndarray, np.ndarray, NormStats]:
    """Fit normalization on the training portion only, apply to both."""
    stats = NormStats(mode=mode)
    if mode == "global-minmax":
        stats.minimum = float(train_X.min())
        stats.maximum = float(train_X.max())
    return (
        apply_normalization(train_X, stats),
        apply_normalization(test_X, stats),
        stats,
    )


def train_and_score(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    test_y: np.ndarray,
    normalization: str = "per-sample-standardize",
) -> Tuple[MetricsReport, ConfusionMatrix, CnnModel]:
    """One train/evaluate cycle on an explicit split."""
    trX, teX, _ = _fit_fold_normalization(train_X, test_X, normalization)
    model = build_model(model_config)
    train(model, trX, train_y, cfg=train_config)
    preds = model.predict(teX)
    report, cm = compute_metrics(preds, test_y)
    return report, cm, model


def _study_metadata(model_config: ModelConfig, train_config: TrainConfig, extra: dict) -> dict:
    meta = {
        "model_config": model_config.to_dict(),
        "train_config": {
            k: v
            for k, v in dataclasses.asdict(train_config).items()
            if k != "val_metric"
        },
    }
    meta.update(extra)
    return meta


def _require_cells(
    recordings: Sequence[CsiRecording],
    scenarios: Sequence[int],
    los: bool,
) -> None:
    have = {(r.scenario_id, r.label, r.los) for r in recordings}
    for s in scenarios:
        for action in ALL_ACTIONS:
            if (s, action, los) not in have:
                raise MissingCell(
                    f"no recording for scenario={s} action={action.name} "
                    f"los={los}"
                )


def _fold_seeded(cfg, seed_offset: int):
    return dataclasses.replace(cfg, seed=cfg.seed + seed_offset)


def run_case_study(
    study: str,
    recordings: Sequence[CsiRecording],
    model_config: Optional[ModelConfig] = None,
    train_config: Optional[TrainConfig] = None,
    out_dir=None,
    window: int = 300,
    stride: int = 300,
    per_class_cap: Optional[int] = None,
    normalization: str = "per-sample-standardize",
    k: int = 5,
) -> CaseStudyResult:
    """Run one of the three evaluation studies over a recording corpus.

    per-scenario-cv : stratified k-fold CV inside each scenario (LOS data),
                      per-scenario metric tables and averaged confusion
                      matrices.
    nlos-comparison : single stratified split per condition on scenario-2
                      LOS vs NLOS data; paired metrics and per-class recall.
    loso            : leave-one-scenario-out over the four scenarios;
                      per-class mean +- std table and averaged confusion.

    Writes JSON (machine), CSV (tables) and plain-text confusion grids to
    out_dir when given.
    """
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = CaseStudyResult(study=study, payload={})

    def emit_json(name: str, payload: dict) -> None:
        if out is None:
            return
        path = out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        result.files.append(path)

    def emit_text(name: str, text: str) -> None:
        if out is None:
            return
        path = out / name
        path.write_text(text + "\n")
        result.files.append(path)

    def emit_csv(name: str, agg: FoldAggregate) -> None:
        if out is None:
            return
        path = out / name
        agg.to_csv(path)
        result.files.append(path)

    if study == "per-scenario-cv":
        los_recs = [r for r in recordings if r.los]
        scenarios = sorted({r.scenario_id for r in los_recs})
        if not scenarios:
            raise MissingCell("corpus has no line-of-sight recordings")
        _require_cells(los_recs, scenarios, los=True)
        payload = {"study": study, "scenarios": {}}
        payload["metadata"] = _study_metadata(
            model_config,
            train_config,
            {
                "protocol": f"stratified-{k}-fold-cross-validation",
                "protocol_note": "fold count is configurable; k=4 reproduces "
                "a four-repetition protocol",
                "window": window,
                "stride": stride,
                "normalization": normalization,
            },
        )
        for s in scenarios:
            ds = assemble(
                [r for r in los_recs if r.scenario_id == s],
                window=window,
                stride=stride,
                per_class_cap=per_class_cap,
            )
            reports, cms = [], []
            for fold, (tr, te) in enumerate(stratified_kfold(ds, k=k, seed=train_config.seed)):
                report, cm, _ = train_and_score(
                    _fold_seeded(model_config, fold),
                    _fold_seeded(train_config, fold),
                    ds.X[tr], ds.y[tr], ds.X[te], ds.y[te],
                    normalization,
                )
                reports.append(report)
                cms.append(cm)
            agg = aggregate_folds(reports, cms)
            payload["scenarios"][str(s)] = {
                "aggregate": agg.to_dict(),
                "folds": [r.to_dict() for r in reports],
                "fold_confusions": [m.counts.tolist() for m in cms],
            }
            emit_json(f"cv_scenario{s}.json", payload["scenarios"][str(s)])
            emit_csv(f"cv_scenario{s}_metrics.csv", agg)
            emit_text(
                f"cv_scenario{s}_confusion.txt",
                _percentage_grid(agg.mean_percentage_confusion),
            )
        emit_json("cv_summary.json", payload)
        result.payload = payload
        return result

    if study == "nlos-comparison":
        s2 = [r for r in recordings if r.scenario_id == 2]
        for los in (True, False):
            subset = [r for r in s2 if r.los == los]
            if not subset:
                raise MissingCell(f"no recording for scenario=2 los={los}")
            _require_cells(subset, [2], los=los)
        payload = {"study": study, "conditions": {}}
        payload["metadata"] = _study_metadata(
            model_config,
            train_config,
            {
                "protocol": "single stratified 80/20 split per condition",
                "window": window,
                "stride": stride,
                "normalization": normalization,
            },
        )
        for los, name in ((True, "los"), (False, "nlos")):
            ds = assemble(
                [r for r in s2 if r.los == los],
                window=window,
                stride=stride,
                per_class_cap=per_class_cap,
            )
            (tr, te) = stratified_kfold(ds, k=5, seed=train_config.seed)[0]
            report, cm, _ = train_and_score(
                model_config, train_config, ds.X[tr], ds.y[tr], ds.X[te], ds.y[te],
                normalization,
            )
            payload["conditions"][name] = {
                "metrics": report.to_dict(),
                "confusion_counts": cm.counts.tolist(),
                "per_class_accuracy": [float(v) for v in report.recall],
            }
            emit_text(f"nlos_{name}_confusion.txt", cm.text_grid())
        payload["accuracy_drop"] = (
            payload["conditions"]["los"]["metrics"]["accuracy"]
            - payload["conditions"]["nlos"]["metrics"]["accuracy"]
        )
        emit_json("nlos_comparison.json", payload)
        if out is not None:
            path = out / "nlos_comparison.csv"
            with open(path, "w") as fh:
                fh.write("condition,accuracy,macro_precision,macro_recall,macro_f1\n")
                for name in ("los", "nlos"):
                    m = payload["conditions"][name]["metrics"]
                    fh.write(
                        f"{name},{m['accuracy']!r},{m['macro_precision']!r},"
                        f"{m['macro_recall']!r},{m['macro_f1']!r}\n"
                    )
            result.files.append(path)
        result.payload = payload
        return result

    if study == "loso":
        los_recs = [r for r in recordings if r.los]
        _require_cells(los_recs, (1, 2, 3, 4), los=True)
        per_scenario = {
            s: assemble(
                [r for r in los_recs if r.scenario_id == s],
                window=window,
                stride=stride,
                per_class_cap=per_class_cap,
            )
            for s in (1, 2, 3, 4)
        }
        pooled = pool_scenarios(per_scenario)
        reports, cms, held = [], [], []
        for i, (s, tr, te) in enumerate(leave_one_scenario_out(pooled)):
            report, cm, _ = train_and_score(
                _fold_seeded(model_config, i),
                _fold_seeded(train_config, i),
                pooled.X[tr], pooled.y[tr], pooled.X[te], pooled.y[te],
                normalization,
            )
            reports.append(report)
            cms.append(cm)
            held.append(s)
        agg = aggregate_folds(reports, cms)
        payload = {
            "study": study,
            "held_out_scenarios": held,
            "aggregate": agg.to_dict(),
            "folds": [r.to_dict() for r in reports],
            "fold_confusions": [m.counts.tolist() for m in cms],
            "metadata": _study_metadata(
                model_config,
                train_config,
                {"window": window, "stride": stride, "normalization": normalization},
            ),
        }
        emit_json("loso.json", payload)
        emit_csv("loso_metrics.csv", agg)
        emit_text("loso_confusion.txt", _percentage_grid(agg.mean_percentage_confusion))
        emit_text("loso_table.txt", agg.per_class_table())
        result.payload = payload
        return result

    raise ValueError(
        f"unknown study {study!r}; expected per-scenario-cv, nlos-comparison or loso"
    )


def _percentage_grid(matrix: np.ndarray, class_names: Tuple[str, ...] = CLASS_NAMES) -> str:
    width = max(8, max(len(n) for n in class_names) + 2)
    head = "true\\pred".ljust(width) + "".join(n.rjust(width) for n in class_names)
    lines = [head]
    for i, name in enumerate(class_names):
        lines.append(
            name.ljust(width)
            + "".join(f"{matrix[i, j]:>{width}.2f}" for j in range(len(class_names)))
        )
    return "\n".join(lines)
