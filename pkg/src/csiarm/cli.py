"""Command-line toolkit: corpus synthesis, live capture, preprocessing,
training, grid search, case-study evaluation and report rendering.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
A JSON config file (--config) supplies flag defaults; explicit flags win.
Every artifact-producing run stamps its resolved configuration into the
output metadata so results are reproducible from (config, seed, inputs).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import csir
from .core import ActionClass, ALL_ACTIONS, CsiArmError, CsiRecording
from .evaluation import run_case_study
from .ingest import DEFAULT_PORT, ingest_stream
from .nn.gridsearch import DEFAULT_GRID_LRS, grid_search
from .nn.model import ModelConfig, build_model, save_checkpoint
from .nn.optim import OPTIMIZER_NAMES
from .nn.train import TrainConfig, train
from .pipeline import (
    NORM_MODES,
    NormStats,
    WindowTooLarge,
    assemble,
    export_csv,
    load_dataset,
    normalize,
    save_dataset,
)
from .synth import CorpusPlan, corpus_filename, default_scene, generate_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    """Bad invocation, flag combination, or config/plan content."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); remap to 1
        raise UsageError(message)


# --- config file -----------------------------------------------------------


def _peek_config_path(argv: Sequence[str]) -> Optional[str]:
    argv = list(argv)
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config expects a path")
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _load_json(path, what: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON (line {exc.lineno}): {exc.msg}")
    if not isinstance(data, dict):
        raise UsageError(f"{what} {path} must contain a JSON object")
    return data


def _parser_dests(parser: argparse.ArgumentParser) -> set:
    return {
        a.dest
        for a in parser._actions
        if a.dest not in ("help", "command") and a.dest != argparse.SUPPRESS
    }


def _apply_config(parser, subparsers: Dict[str, argparse.ArgumentParser], config: dict):
    known = _parser_dests(parser)
    for sub in subparsers.values():
        known |= _parser_dests(sub)
    for key in config:
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
    for p in [parser, *subparsers.values()]:
        mine = {k: v for k, v in config.items() if k in _parser_dests(p)}
        if mine:
            p.set_defaults(**mine)


# --- shared helpers ----------------------------------------------------------


def _resolved_args(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k == "func":
            continue
        if isinstance(v, tuple):
            v = list(v)
        if v is None or isinstance(v, (str, int, float, bool, list)):
            out[k] = v
    return out


def _parse_action(token) -> ActionClass:
    if isinstance(token, ActionClass):
        return token
    if isinstance(token, int):
        return ActionClass(token)
    try:
        return ActionClass[str(token).upper()]
    except KeyError:
        names = ", ".join(a.name.lower() for a in ALL_ACTIONS)
        raise UsageError(f"unknown action {token!r}; expected one of {names}")


def _parse_int_list(value) -> Tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(tok) for tok in str(value).split(",") if tok.strip())


def _parse_float_list(value) -> Tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    return tuple(float(tok) for tok in str(value).split(",") if tok.strip())


def _collect_csir_paths(inputs: Sequence[str]) -> List[Path]:
    paths: List[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csir")))
        elif p.exists():
            paths.append(p)
        else:
            raise UsageError(f"input {item} does not exist")
    if not paths:
        raise UsageError("no .csir input files found")
    return paths


def _load_recordings(inputs: Sequence[str], window: Optional[int] = None):
    recs = []
    for path in _collect_csir_paths(inputs):
        rec = csir.read_recording(path)
        if window is not None and rec.n_frames < window:
            raise WindowTooLarge(
                f"{path}: window {window} exceeds recording length {rec.n_frames}"
            )
        recs.append(rec)
    return recs


def _model_config_from_args(args, height: int, width: int) -> ModelConfig:
    return ModelConfig(
        input_height=height,
        input_width=width,
        conv_filters=_parse_int_list(args.filters),
        kernel_size=args.kernel_size,
        pool_size=args.pool_size,
        dense_units=args.dense_units,
        dropout=args.dropout,
        n_classes=len(ALL_ACTIONS),
        l1=args.l1,
        l2=args.l2,
        seed=args.seed or 0,
    )


def _train_config_from_args(args) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        optimizer=args.optimizer,
        learning_rate=args.lr,
        seed=args.seed or 0,
        val_fraction=args.val_fraction,
        verbose=args.verbose,
    )


def _dataset_from_args(args):
    """Load a saved dataset or assemble one from raw recordings.

    Returns the dataset plus the fitted normalization stats that inference
    must reapply (mode "none" for saved datasets, which are already
    normalized)."""
    if args.data is not None:
        return load_dataset(args.data), NormStats(mode="none")
    if not args.inputs:
        raise UsageError("either --data or --inputs is required")
    recs = _load_recordings(args.inputs, window=args.window)
    ds = assemble(
        recs, window=args.window, stride=args.stride, per_class_cap=args.per_class_cap
    )
    return normalize(ds, args.normalize)


def _write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- synth -------------------------------------------------------------------

DEFAULT_PLAN = {
    "seed": 0,
    "packets": 10000,
    "rate_hz": 30.0,
    "recordings_per_cell": 1,
    "noise_std": None,
    "groups": [
        {"scenarios": [1, 2, 3, 4], "los": [True]},
        {"scenarios": [2], "los": [False]},
    ],
}

_PLAN_KEYS = set(DEFAULT_PLAN)
_GROUP_KEYS = {"scenarios", "los", "actions", "recordings_per_cell"}


def _key_line(text: str, key: str) -> str:
    pos = text.find(f'"{key}"')
    return str(text.count("\n", 0, pos) + 1) if pos >= 0 else "?"


def _load_plan(path: Optional[str]) -> dict:
    plan = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULT_PLAN.items()}
    plan["groups"] = [dict(g) for g in DEFAULT_PLAN["groups"]]
    if path is None:
        return plan
    text = Path(path).read_text()
    data = _load_json(path, "plan file")
    for key, value in data.items():
        if key not in _PLAN_KEYS:
            raise UsageError(
                f"plan file {path}: unknown key {key!r} (line {_key_line(text, key)})"
            )
        plan[key] = value
    for group in plan["groups"]:
        if not isinstance(group, dict):
            raise UsageError(f"plan file {path}: each group must be an object")
        for key in group:
            if key not in _GROUP_KEYS:
                raise UsageError(
                    f"plan file {path}: unknown group key {key!r} "
                    f"(line {_key_line(text, key)})"
                )
    return plan


def cmd_synth(args) -> int:
    plan = _load_plan(args.plan)
    for flag in ("seed", "packets", "rate_hz", "recordings_per_cell", "noise_std"):
        value = getattr(args, flag)
        if value is not None:
            plan[flag] = value

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = default_scene(seed=int(plan["seed"]))
    manifest = {"config": {**plan, "out": str(out)}, "files": []}

    for group in plan["groups"]:
        actions = tuple(_parse_action(a) for a in group.get("actions", list(ALL_ACTIONS)))
        group_plan = CorpusPlan(
            scenarios=tuple(int(s) for s in group["scenarios"]),
            actions=actions,
            los=tuple(bool(v) for v in group.get("los", [True])),
            recordings_per_cell=int(
                group.get("recordings_per_cell", plan["recordings_per_cell"])
            ),
            packets=int(plan["packets"]),
            rate_hz=float(plan["rate_hz"]),
            seed=int(plan["seed"]),
            noise_std=plan["noise_std"],
        )
        coords = [
            (s, a, l, i)
            for s in group_plan.scenarios
            for a in group_plan.actions
            for l in group_plan.los
            for i in range(group_plan.recordings_per_cell)
        ]
        recordings = generate_corpus(scene, group_plan)
        for (s, a, l, i), rec in zip(coords, recordings):
            name = corpus_filename(a, s, l, i)
            blob = csir.encode_recording(rec)
            (out / name).write_bytes(blob)
            manifest["files"].append(
                {
                    "name": name,
                    "scenario": int(s),
                    "action": a.name,
                    "los": bool(l),
                    "frames": rec.n_frames,
                    "sha256": hashlib.sha256(blob).hexdigest(),
                }
            )

    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(manifest['files'])} recordings + manifest.json to {out}")
    return EXIT_OK


# --- ingest ------------------------------------------------------------------


def cmd_ingest(args) -> int:
    if args.count is None and args.duration is None:
        raise UsageError("at least one of --count or --duration is required")
    result = ingest_stream(
        port=args.port,
        max_frames=args.count,
        max_seconds=args.duration,
        host=args.host,
    )
    if not result.frames:
        raise CsiArmError(
            f"captured 0 frames on port {result.port} "
            f"({result.dropped} dropped); a recording needs at least one frame"
        )
    label = _parse_action(args.label) if args.label is not None else None
    rec = CsiRecording.from_frames(
        result.frames,
        label=label,
        scenario_id=args.scenario,
        los=not args.nlos,
        sample_rate_hz=args.sample_rate,
    )
    csir.write_recording(args.out, rec)
    print(
        f"wrote {rec.n_frames} frames to {args.out} "
        f"(dropped {result.dropped} malformed datagrams)"
    )
    return EXIT_OK


# --- preprocess ---------------------------------------------------------------


def cmd_preprocess(args) -> int:
    recs = _load_recordings(args.inputs, window=args.window)
    ds = assemble(
        recs, window=args.window, stride=args.stride, per_class_cap=args.per_class_cap
    )
    ds, stats = normalize(ds, args.normalize)
    out = Path(args.out)
    save_dataset(out, ds)
    meta = {
        "config": _resolved_args(args),
        "normalization": stats.to_dict(),
        "n_samples": int(len(ds.y)),
        "sample_shape": [int(v) for v in ds.X.shape[1:]],
        "class_counts": {a.name: int(c) for a, c in ds.class_counts().items()},
        "sources": [str(p) for p in _collect_csir_paths(args.inputs)],
    }
    _write_json(out.with_suffix(out.suffix + ".meta.json"), meta)
    if args.csv is not None:
        export_csv(args.csv, ds)
    print(f"wrote {len(ds.y)} samples of shape {tuple(ds.X.shape[1:])} to {out}")
    return EXIT_OK


# --- train -------------------------------------------------------------------


def cmd_train(args) -> int:
    ds, norm_stats = _dataset_from_args(args)
    model_config = _model_config_from_args(args, ds.X.shape[1], ds.X.shape[2])
    train_config = _train_config_from_args(args)
    model = build_model(model_config)
    history = train(model, ds.X, ds.y, cfg=train_config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.npz", model, norm_stats)
    history.to_csv(out / "history.csv")
    meta = {
        "config": _resolved_args(args),
        "model_config": model_config.to_dict(),
        "train_config": {
            k: v for k, v in dataclasses.asdict(train_config).items() if k != "val_metric"
        },
        "normalization": norm_stats.to_dict(),
        "param_count": model.param_count,
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "best_val_accuracy": history.best_val_accuracy,
    }
    _write_json(out / "train_meta.json", meta)
    print(
        f"trained {history.stopped_epoch} epochs; best validation accuracy "
        f"{history.best_val_accuracy:.4f} at epoch {history.best_epoch}; "
        f"checkpoint in {out}"
    )
    return EXIT_OK


# --- gridsearch ---------------------------------------------------------------


def cmd_gridsearch(args) -> int:
    ds, _ = _dataset_from_args(args)
    model_config = _model_config_from_args(args, ds.X.shape[1], ds.X.shape[2])
    train_config = _train_config_from_args(args)
    optimizers = (
        tuple(str(t).strip().lower() for t in str(args.optimizers).split(","))
        if args.optimizers is not None
        else OPTIMIZER_NAMES
    )
    lrs = _parse_float_list(args.lrs) if args.lrs is not None else DEFAULT_GRID_LRS
    report = grid_search(
        ds.X, ds.y, model_config, train_config, optimizers=optimizers, lrs=lrs
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "grid.csv")
    best = report.best()
    meta = {
        "config": _resolved_args(args),
        "model_config": model_config.to_dict(),
        "optimizers": list(report.optimizers),
        "learning_rates": list(report.lrs),
        "cells": [dataclasses.asdict(c) for c in report.cells],
        "best": dataclasses.asdict(best),
    }
    _write_json(out / "grid.json", meta)
    print(report.table())
    print(
        f"best cell: {best.optimizer} @ lr={best.lr} "
        f"(val accuracy {best.val_accuracy:.4f}); table in {out / 'grid.csv'}"
    )
    return EXIT_OK


# --- evaluate -----------------------------------------------------------------

STUDIES = ("per-scenario-cv", "nlos-comparison", "loso")


def cmd_evaluate(args) -> int:
    recs = _load_recordings(args.inputs, window=args.window)
    model_config = _model_config_from_args(args, args.window, 234)
    train_config = _train_config_from_args(args)
    result = run_case_study(
        args.study,
        recs,
        model_config=model_config,
        train_config=train_config,
        out_dir=args.out,
        window=args.window,
        stride=args.stride,
        per_class_cap=args.per_class_cap,
        normalization=args.normalize,
        k=args.folds,
    )
    payload = result.payload
    if args.study == "per-scenario-cv":
        for s, block in sorted(payload["scenarios"].items()):
            acc = block["aggregate"]["accuracy"]
            print(f"scenario {s}: accuracy {acc['mean']:.2f} +- {acc['std']:.2f}")
    elif args.study == "nlos-comparison":
        for name in ("los", "nlos"):
            m = payload["conditions"][name]["metrics"]
            print(f"{name}: accuracy {m['accuracy']:.2f}")
        print(f"accuracy drop: {payload['accuracy_drop']:.2f}")
    else:
        acc = payload["aggregate"]["accuracy"]
        print(f"leave-one-scenario-out: accuracy {acc['mean']:.2f} +- {acc['std']:.2f}")
    if args.out is not None:
        print(f"reports in {args.out}")
    return EXIT_OK


# --- report ------------------------------------------------------------------


def _render_aggregate_dict(agg: dict) -> str:
    names = agg["class_names"]
    lines = ["class      precision            recall               f1"]
    for i, name in enumerate(names):
        p, ps = agg["precision"]["mean"][i], agg["precision"]["std"][i]
        r, rs = agg["recall"]["mean"][i], agg["recall"]["std"][i]
        f, fs = agg["f1"]["mean"][i], agg["f1"]["std"][i]
        lines.append(
            f"{name:<10}{p:6.2f} +- {ps:5.2f}    {r:6.2f} +- {rs:5.2f}    {f:6.2f} +- {fs:5.2f}"
        )
    acc = agg["accuracy"]
    lines.append(f"{'accuracy':<10}{acc['mean']:6.2f} +- {acc['std']:5.2f}")
    if agg.get("mean_percentage_confusion"):
        matrix = agg["mean_percentage_confusion"]
        width = max(8, max(len(n) for n in names) + 2)
        lines.append("")
        lines.append("true\\pred".ljust(width) + "".join(n.rjust(width) for n in names))
        for i, name in enumerate(names):
            lines.append(
                name.ljust(width)
                + "".join(f"{matrix[i][j]:>{width}.2f}" for j in range(len(names)))
            )
    return "\n".join(lines)


def _render_metrics_dict(m: dict) -> str:
    names = m["class_names"]
    lines = ["class      precision   recall       f1"]
    for i, name in enumerate(names):
        lines.append(
            f"{name:<10}{m['precision'][i]:8.2f} {m['recall'][i]:8.2f} {m['f1'][i]:8.2f}"
        )
    lines.append(f"{'accuracy':<10}{m['accuracy']:8.2f}")
    if m.get("zero_denominator"):
        lines.append("zero-denominator cells: " + ", ".join(m["zero_denominator"]))
    return "\n".join(lines)


def _render_payload(payload: dict) -> str:
    study = payload.get("study")
    if study == "per-scenario-cv":
        parts = []
        for s, block in sorted(payload["scenarios"].items()):
            parts.append(f"== scenario {s} ==")
            parts.append(_render_aggregate_dict(block["aggregate"]))
        return "\n".join(parts)
    if study == "nlos-comparison":
        parts = []
        for name in ("los", "nlos"):
            parts.append(f"== {name} ==")
            parts.append(_render_metrics_dict(payload["conditions"][name]["metrics"]))
        parts.append(f"accuracy drop: {payload['accuracy_drop']:.2f}")
        return "\n".join(parts)
    if study == "loso":
        return "== leave-one-scenario-out ==\n" + _render_aggregate_dict(
            payload["aggregate"]
        )
    if "aggregate" in payload:  # single per-scenario block
        return _render_aggregate_dict(payload["aggregate"])
    raise UsageError("unrecognized report file (no study/aggregate keys)")


def cmd_report(args) -> int:
    for item in args.inputs:
        payload = _load_json(item, "report file")
        text = _render_payload(payload)
        print(f"--- {item} ---")
        print(text)
        if args.out is not None:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            target = out / (Path(item).stem + ".txt")
            target.write_text(text + "\n")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def _add_common(parser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument("--config", type=str, default=None, help="JSON file of flag defaults")
    parser.add_argument("--threads", type=int, default=None, help="cap numeric-library threads")
    parser.add_argument("--verbose", action="store_true", help="chatty progress output")


def _add_model_train_flags(parser) -> None:
    parser.add_argument("--window", type=int, default=300, help="packets per sample window")
    parser.add_argument("--stride", type=int, default=300, help="window step in packets")
    parser.add_argument("--normalize", choices=NORM_MODES, default="per-sample-standardize")
    parser.add_argument("--per-class-cap", type=int, default=None)
    parser.add_argument("--filters", type=str, default="16,32,64",
                        help="comma-separated convolution filter counts")
    parser.add_argument("--kernel-size", type=int, default=3)
    parser.add_argument("--pool-size", type=int, default=2)
    parser.add_argument("--dense-units", type=int, default=128)
    parser.add_argument("--dropout", type=float, default=0.5)
    parser.add_argument("--l1", type=float, default=1e-4)
    parser.add_argument("--l2", type=float, default=1e-4)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--optimizer", choices=OPTIMIZER_NAMES, default="adam")
    parser.add_argument("--lr", type=float, default=0.001)
    parser.add_argument("--patience", type=int, default=6)
    parser.add_argument("--val-fraction", type=float, default=0.2)


def build_parser() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog="csiarm",
        description="WiFi-CSI robotic-arm motion classification toolkit",
    )
    sub = parser.add_subparsers(dest="command")
    subparsers: Dict[str, argparse.ArgumentParser] = {}

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        subparsers[name] = p
        return p

    p = add("synth", "generate a synthetic recording corpus")
    p.add_argument("--plan", type=str, default=None, help="JSON corpus plan")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.add_argument("--packets", type=int, default=None, help="frames per recording")
    p.add_argument("--rate-hz", type=float, default=None, help="sampling rate")
    p.add_argument("--recordings-per-cell", type=int, default=None)
    p.add_argument("--noise-std", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = add("ingest", "capture sniffer datagrams from UDP into a recording")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--count", type=int, default=None, help="stop after this many frames")
    p.add_argument("--duration", type=float, default=None, help="stop after this many seconds")
    p.add_argument("--out", type=str, required=True, help="output .csir file")
    p.add_argument("--label", type=str, default=None, help="action label (arc/elbow/circle/silence)")
    p.add_argument("--scenario", type=int, default=1)
    p.add_argument("--nlos", action="store_true", help="mark the capture as non-line-of-sight")
    p.add_argument("--sample-rate", type=float, default=30.0)
    p.set_defaults(func=cmd_ingest)

    p = add("preprocess", "window recordings into a balanced dataset file")
    p.add_argument("--inputs", nargs="+", required=True, help=".csir files or directories")
    p.add_argument("--out", type=str, required=True, help="output .csds dataset")
    p.add_argument("--window", type=int, default=300)
    p.add_argument("--stride", type=int, default=300)
    p.add_argument("--normalize", choices=NORM_MODES, default="per-sample-standardize")
    p.add_argument("--per-class-cap", type=int, default=None)
    p.add_argument("--csv", type=str, default=None, help="also export rows as CSV")
    p.set_defaults(func=cmd_preprocess)

    p = add("train", "train the classifier on a dataset or raw recordings")
    p.add_argument("--data", type=str, default=None, help="a .csds dataset file")
    p.add_argument("--inputs", nargs="*", default=None, help=".csir files or directories")
    p.add_argument("--out", type=str, required=True, help="output directory")
    _add_model_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = add("gridsearch", "optimizer x learning-rate sweep")
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--inputs", nargs="*", default=None)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--optimizers", type=str, default=None,
                   help="comma-separated optimizer names (default: all six)")
    p.add_argument("--lrs", type=str, default=None,
                   help="comma-separated learning rates (default: 11-point sweep)")
    _add_model_train_flags(p)
    p.set_defaults(func=cmd_gridsearch)

    p = add("evaluate", "run a case study over a recording corpus")
    p.add_argument("--study", choices=STUDIES, required=True)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", type=str, default=None, help="report directory")
    p.add_argument("--folds", type=int, default=5)
    _add_model_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = add("report", "render JSON reports as plain-text tables")
    p.add_argument("--inputs", nargs="+", required=True, help="report .json files")
    p.add_argument("--out", type=str, default=None, help="directory for .txt renderings")
    p.set_defaults(func=cmd_report)

    return parser, subparsers


_THREAD_LIMITER = None  # keeps the limiter alive for the process lifetime


def _apply_thread_cap(threads: Optional[int]) -> None:
    global _THREAD_LIMITER
    if threads is None:
        return
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    try:
        import threadpoolctl

        _THREAD_LIMITER = threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:
        import os

        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)


def main(argv: Optional[Sequence[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        parser, subparsers = build_parser()
        config_path = _peek_config_path(argv)
        if config_path is not None:
            _apply_config(parser, subparsers, _load_json(config_path, "config file"))
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        _apply_thread_cap(args.threads)
        return args.func(args)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CsiArmError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
