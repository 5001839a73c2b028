"""Command-line entry points.

Verbs: run, compare, geometry, shift, contraction, timing. Each takes a
JSON config (--config), writes into <out>/<fingerprint>/ where the
fingerprint is a stable hash of the canonicalized config, and exits 0 on
success, 1 on runtime failure, 2 on config errors. The out directory
resolves as --out flag, then GRADAL_OUT, then the config's out_dir, then
./runs. All JSON is written with sorted keys so reruns are byte-stable;
CSVs start with a "# fingerprint=..." comment line, then a header row.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import METHODS, df_scores, pseudo_labels, timed_select
from .al_loop import ExperimentConfig, run_experiment
from .contraction import ContractionConfig, cumulative_df_bound_check, run_contraction_trace
from .data import (
    Dataset,
    PoolState,
    SplitSpec,
    Standardizer,
    init_pool,
    load_csv,
    make_blobs,
    make_shifted,
    split,
)
from .evaluation import (
    ComparisonSlice,
    PenaltyMatrix,
    build_ppm,
    curves_from_results,
    loss_scores,
)
from .model import (
    LAST_LAYER,
    SCOPES,
    ArchSpec,
    TrainConfig,
    grad_embeddings,
    init_model,
    train,
)
from .numerics import Rng, derive_seed, pca_project

OUT_ENV_VAR = "GRADAL_OUT"
DEFAULT_OUT = "runs"


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


# ---------------------------------------------------------------- config

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fingerprint_of(config: dict) -> str:
    """First 12 hex chars of the sha256 of the canonical config, with
    output-location fields excluded so moving outputs keeps identity."""
    trimmed = {k: v for k, v in config.items() if k != "out_dir"}
    return hashlib.sha256(canonical_json(trimmed).encode()).hexdigest()[:12]


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config: top level must be an object")
    return config


def _get(cfg: dict, name: str, kind, default=None, required=False, where=""):
    label = f"{where}{name}"
    if name not in cfg:
        if required:
            raise ConfigError(f"{label}: required field missing")
        return default
    value = cfg[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        raise ConfigError(f"{label}: expected {getattr(kind, '__name__', kind)}")
    return value


def build_dataset(cfg: dict, where: str = "dataset.") -> Dataset:
    if not isinstance(cfg, dict):
        raise ConfigError("dataset: expected an object")
    kind = _get(cfg, "kind", str, required=True, where=where)
    if kind == "blobs":
        return make_blobs(
            n_samples=_get(cfg, "n_samples", int, required=True, where=where),
            n_classes=_get(cfg, "n_classes", int, required=True, where=where),
            n_features=_get(cfg, "n_features", int, required=True, where=where),
            spread=_get(cfg, "spread", float, required=True, where=where),
            seed=_get(cfg, "seed", int, 0, where=where),
        )
    if kind == "csv":
        path = _get(cfg, "path", str, required=True, where=where)
        label = _get(cfg, "label_column", str, "label", where=where)
        try:
            return load_csv(path, label_column=label)
        except FileNotFoundError as exc:
            raise ConfigError(f"{where}path: {exc}") from exc
    raise ConfigError(f"{where}kind: unknown dataset kind {kind!r}")


def build_split(cfg: dict) -> SplitSpec:
    cfg = cfg or {}
    try:
        return SplitSpec(
            test_fraction=_get(cfg, "test_fraction", float, 0.2, where="split."),
            validation_fraction=_get(cfg, "validation_fraction", float, 0.0, where="split."),
            seed=_get(cfg, "seed", int, 0, where="split."),
            stratified=_get(cfg, "stratified", bool, True, where="split."),
        )
    except ValueError as exc:
        raise ConfigError(f"split: {exc}") from exc


def build_arch(cfg: dict, dataset: Dataset) -> ArchSpec:
    cfg = cfg or {}
    widths = _get(cfg, "hidden_widths", list, [512, 256], where="model.")
    if not all(isinstance(w, int) and w > 0 for w in widths):
        raise ConfigError("model.hidden_widths: expected positive integers")
    return ArchSpec(input_dim=dataset.n_features, n_classes=dataset.n_classes,
                    hidden_widths=tuple(widths))


def build_train(cfg: dict) -> TrainConfig:
    cfg = cfg or {}
    try:
        return TrainConfig(
            learning_rate=_get(cfg, "learning_rate", float, 0.001, where="train."),
            epochs=_get(cfg, "epochs", int, 40, where="train."),
            momentum=_get(cfg, "momentum", float, 0.9, where="train."),
            minibatch_size=_get(cfg, "minibatch_size", int, 8, where="train."),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc


def _methods_from(cfg: dict) -> list:
    methods = _get(cfg, "methods", list, list(METHODS))
    if not methods:
        raise ConfigError("methods: must be nonempty")
    for i, m in enumerate(methods):
        if m not in METHODS:
            raise ConfigError(f"methods[{i}]: unknown method {m!r}")
    if len(set(methods)) != len(methods):
        raise ConfigError("methods: duplicate entries")
    return methods


def _scope_from(cfg: dict) -> str:
    scope = _get(cfg, "scope", str, LAST_LAYER)
    if scope not in SCOPES:
        raise ConfigError(f"scope: unknown scope {scope!r}")
    return scope


def _seeds_from(cfg: dict, default=(0,)) -> tuple:
    seeds = _get(cfg, "seeds", list, list(default))
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds: expected a nonempty list of integers")
    return tuple(seeds)


def _standardized(dataset: Dataset, train_idx: np.ndarray) -> Dataset:
    scaler = Standardizer.fit(dataset.features[train_idx])
    return Dataset(scaler.transform(dataset.features), dataset.labels.copy(),
                   dataset.n_classes, name=dataset.name)


def _arch_name(arch: ArchSpec) -> str:
    if not arch.hidden_widths:
        return "linear"
    return "mlp-" + "x".join(str(w) for w in arch.hidden_widths)


# ---------------------------------------------------------------- output

def resolve_out_dir(flag_value, config: dict) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(OUT_ENV_VAR)
    if env:
        return Path(env)
    return Path(config.get("out_dir") or DEFAULT_OUT)


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def write_table(path: Path, fingerprint: str, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# fingerprint={fingerprint}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _manifest(command: str, fingerprint: str, config: dict, outputs, started, finished) -> dict:
    return {
        "command": command,
        "fingerprint": fingerprint,
        "version": __version__,
        "config": config,
        "outputs": sorted(str(p) for p in outputs),
        "started": started,
        "finished": finished,
    }


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()) + "Z"


def _prepare_dir(out_root: Path, fingerprint: str) -> Path:
    run_dir = out_root / fingerprint
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _embedded_manifest(fingerprint: str, config: dict, **extra) -> dict:
    payload = {"fingerprint": fingerprint, "version": __version__, "config": config}
    payload.update(extra)
    return payload


def _batch_dict(batch):
    if batch is None:
        return None
    return {
        "indices": [int(i) for i in batch.indices],
        "method": batch.method,
        "scores": None if batch.scores is None else [float(s) for s in batch.scores],
    }


# ---------------------------------------------------------------- run

def cmd_run(config: dict, out_flag=None, threads: int = 1) -> int:
    started = _timestamp()
    dataset = build_dataset(_get(config, "dataset", dict, required=True))
    split_spec = build_split(_get(config, "split", dict, {}))
    arch = build_arch(_get(config, "model", dict, {}), dataset)
    train_cfg = build_train(_get(config, "train", dict, {}))
    methods = _methods_from(config)
    scope = _scope_from(config)
    seeds = _seeds_from(config)
    b = _get(config, "batch_size", int, required=True)
    rounds = _get(config, "rounds", int, required=True)
    initial_size = _get(config, "initial_size", int)
    sweep_lr = _get(config, "sweep_lr", bool, False)
    standardize = _get(config, "standardize", bool, False)

    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, config), fingerprint)

    if standardize:
        train_idx, _, _ = split(dataset, split_spec)
        dataset = _standardized(dataset, train_idx)

    per_method = {}
    for method in methods:
        try:
            cfg = ExperimentConfig(
                arch=arch, train=train_cfg, method=method, b=b, rounds=rounds,
                seeds=seeds, initial_size=initial_size, scope=scope,
                split_spec=split_spec, sweep_lr=sweep_lr)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        result = run_experiment(cfg, dataset, fingerprint=fingerprint,
                                threads=threads)
        per_method[method] = result

    results_payload = {
        "manifest": _embedded_manifest(
            fingerprint, config,
            dataset_name=dataset.name, arch_name=_arch_name(arch)),
        "per_method": {
            m: {
                "seeds": list(r.seeds),
                "learning_rate": r.learning_rate,
                "truncated": r.truncated,
                "seed_errors": r.seed_errors,
                "per_seed": [
                    [
                        {
                            "round": rec.round,
                            "labeled_size": rec.labeled_size,
                            "test_accuracy": rec.test_accuracy,
                            "acquisition_seconds": rec.acquisition_seconds,
                            "batch": _batch_dict(rec.batch),
                        }
                        for rec in records
                    ]
                    for records in r.per_seed
                ],
            }
            for m, r in per_method.items()
        },
    }
    results_path = out_dir / "results.json"
    write_json(results_path, results_payload)

    rows = []
    for m, r in per_method.items():
        for seed, records in zip(r.seeds, r.per_seed):
            for rec in records:
                rows.append([m, rec.round, rec.labeled_size, seed,
                             rec.test_accuracy, rec.acquisition_seconds])
    rounds_path = out_dir / "rounds.csv"
    write_table(rounds_path, fingerprint,
                ["method", "round", "labeled_size", "seed", "accuracy", "acq_seconds"],
                rows)

    manifest_path = out_dir / "manifest.json"
    write_json(manifest_path, _manifest("run", fingerprint, config,
                                        [results_path, rounds_path],
                                        started, _timestamp()))
    print(f"run complete: {out_dir}")
    return 0


# ---------------------------------------------------------------- compare

def parse_slice(text: str) -> ComparisonSlice:
    if text in ("all", "all_rounds"):
        return ComparisonSlice("all_rounds")
    if text in ("early", "late"):
        return ComparisonSlice(text)
    for prefix, kind in (("by-dataset:", "by_dataset"), ("by-arch:", "by_arch"),
                         ("dataset:", "by_dataset"), ("arch:", "by_arch")):
        if text.startswith(prefix):
            return ComparisonSlice(kind, text[len(prefix):])
    raise ConfigError(
        f"slice: unknown slice {text!r} (use all|early|late|by-dataset:<name>|by-arch:<name>)")


def _load_results_files(results_dir: Path):
    paths = sorted(results_dir.glob("**/results.json"))
    if not paths:
        raise ConfigError(f"results_dir: no results.json found under {results_dir}")
    loaded = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            loaded.append((p, json.load(fh)))
    return loaded


class _CurveView:
    def __init__(self, per_seed):
        self.per_seed = per_seed


class _RecordView:
    def __init__(self, accuracy):
        self.test_accuracy = accuracy


def _curves_from_payload(path: Path, payload: dict):
    per_method = payload.get("per_method", {})
    if len(per_method) < 2:
        raise ValueError(f"{path}: needs at least two methods")
    views = {
        m: _CurveView([[_RecordView(rec["test_accuracy"]) for rec in seq]
                       for seq in entry["per_seed"]])
        for m, entry in per_method.items()
    }
    manifest = payload.get("manifest", {})
    return curves_from_results(views, dataset=manifest.get("dataset_name", ""),
                               arch=manifest.get("arch_name", ""))


def cmd_compare(results_dir, slice_name: str, alpha: float, out_flag=None) -> int:
    started = _timestamp()
    comparison_slice = parse_slice(slice_name)
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError("alpha: must be in [0, 1]")
    loaded = _load_results_files(Path(results_dir))
    experiments, bad = [], []
    for path, payload in loaded:
        try:
            experiments.append(_curves_from_payload(path, payload))
        except (ValueError, KeyError, TypeError) as exc:
            bad.append(f"{path}: {exc}")
    if bad:
        raise RuntimeError("unusable result files:\n" + "\n".join(bad))
    try:
        # alpha 0 rejects nothing; assemble at alpha 1 for the shared
        # validation, then zero the win mass
        ppm = build_ppm(experiments, comparison_slice, alpha if alpha > 0.0 else 1.0)
    except ValueError as exc:
        raise RuntimeError(
            f"{exc}; experiments: " + ", ".join(str(p) for p, _ in loaded)) from exc
    if alpha == 0.0:
        ppm = PenaltyMatrix(methods=ppm.methods, P=np.zeros_like(ppm.P),
                            experiments_counted=ppm.experiments_counted)
    scores = loss_scores(ppm)

    config = {
        "command": "compare",
        "slice": slice_name,
        "alpha": alpha,
        "inputs": sorted(payload["manifest"]["fingerprint"] for _, payload in loaded),
    }
    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, {}), fingerprint)

    ppm_json = out_dir / "ppm.json"
    write_json(ppm_json, {
        "manifest": _embedded_manifest(fingerprint, config),
        "methods": list(ppm.methods),
        "P": [[float(v) for v in row] for row in ppm.P],
        "experiments_counted": ppm.experiments_counted,
        "loss_scores": scores,
    })
    ppm_csv = out_dir / "ppm.csv"
    write_table(ppm_csv, fingerprint, ["method"] + list(ppm.methods),
                [[m] + [float(v) for v in ppm.P[i]] for i, m in enumerate(ppm.methods)])
    loss_csv = out_dir / "loss_scores.csv"
    write_table(loss_csv, fingerprint, ["method", "loss_score"],
                [[m, scores[m]] for m in ppm.methods])
    write_json(out_dir / "manifest.json",
               _manifest("compare", fingerprint, config,
                         [ppm_json, ppm_csv, loss_csv], started, _timestamp()))
    print(f"compare complete: {out_dir}")
    return 0


# ---------------------------------------------------------------- geometry

def cmd_geometry(config: dict, out_flag=None) -> int:
    started = _timestamp()
    dataset = build_dataset(_get(config, "dataset", dict, required=True))
    arch = build_arch(_get(config, "model", dict, {}), dataset)
    train_cfg = build_train(_get(config, "train", dict, {}))
    methods = _methods_from(config)
    scope = _scope_from(config)
    seed = _get(config, "seed", int, 0)
    initial_size = _get(config, "initial_size", int, 10)
    batch_sizes = _get(config, "batch_sizes", list, [10, 20, 40])
    if not batch_sizes or not all(isinstance(v, int) and v > 0 for v in batch_sizes):
        raise ConfigError("batch_sizes: expected positive integers")

    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, config), fingerprint)

    all_idx = np.arange(dataset.n_samples)
    pool = init_pool(all_idx, initial_size, seed)
    model = init_model(arch, seed=derive_seed(seed, "init"))
    model = train(model, dataset, pool.labeled,
                  replace(train_cfg, seed=derive_seed(seed, "train")))
    param_hash = hashlib.sha256(model.params.tobytes()).hexdigest()

    input_xy = pca_project(dataset.features, 2)
    emb = grad_embeddings(model, dataset.features,
                          pseudo_labels(model, dataset.features), scope=scope)
    emb_xy = pca_project(emb, 2)

    batches, hashes = {}, {}
    for method in methods:
        batches[method] = {}
        for b in batch_sizes:
            rng = Rng(seed).derive(f"geometry/{method}/B{b}")
            batch, _ = timed_select(method, model, dataset, pool, b, rng, scope=scope)
            batches[method][str(b)] = [int(i) for i in batch.indices]
            hashes[f"{method}/B{b}"] = hashlib.sha256(model.params.tobytes()).hexdigest()

    labeled_set = set(int(i) for i in pool.labeled)
    rows_input, rows_emb = [], []
    for method in methods:
        for b in batch_sizes:
            acquired = set(batches[method][str(b)])
            for i in range(dataset.n_samples):
                role = ("initial" if i in labeled_set
                        else "acquired" if i in acquired else "pool")
                rows_input.append([method, b, i, input_xy[i, 0], input_xy[i, 1], role])
                rows_emb.append([method, b, i, emb_xy[i, 0], emb_xy[i, 1], role])

    input_csv = out_dir / "geometry_input.csv"
    emb_csv = out_dir / "geometry_embedding.csv"
    header = ["method", "batch_size", "index", "x", "y", "role"]
    write_table(input_csv, fingerprint, header, rows_input)
    write_table(emb_csv, fingerprint, header, rows_emb)

    geometry_json = out_dir / "geometry.json"
    write_json(geometry_json, {
        "manifest": _embedded_manifest(fingerprint, config),
        "model_param_sha256": param_hash,
        "param_hash_per_acquisition": hashes,
        "initial": [int(i) for i in pool.labeled],
        "batches": batches,
    })
    write_json(out_dir / "manifest.json",
               _manifest("geometry", fingerprint, config,
                         [input_csv, emb_csv, geometry_json], started, _timestamp()))
    print(f"geometry complete: {out_dir}")
    return 0


# ---------------------------------------------------------------- shift

def _shift_vector(config: dict, dataset: Dataset) -> np.ndarray:
    raw = config.get("shift")
    if raw is None:
        raise ConfigError("shift: required field missing")
    if isinstance(raw, list):
        if len(raw) != dataset.n_features:
            raise ConfigError(f"shift: expected {dataset.n_features} entries")
        return np.asarray(raw, dtype=float)
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        spread = _get(config.get("dataset", {}), "spread", float, 1.0)
        direction = np.ones(dataset.n_features) / np.sqrt(dataset.n_features)
        return float(raw) * spread * direction
    raise ConfigError("shift: expected a number (sigma multiple) or a vector")


def cmd_shift(config: dict, out_flag=None) -> int:
    started = _timestamp()
    dataset = build_dataset(_get(config, "dataset", dict, required=True))
    split_spec = build_split(_get(config, "split", dict, {}))
    arch = build_arch(_get(config, "model", dict, {}), dataset)
    train_cfg = build_train(_get(config, "train", dict, {}))
    scope = _scope_from(config)
    seeds = _seeds_from(config)
    shift = _shift_vector(config, dataset)
    shifted = make_shifted(dataset, shift)

    train_idx, _, test_idx = split(dataset, split_spec)
    eval_size = _get(config, "eval_size", int, int(test_idx.size))
    if not 1 <= eval_size <= test_idx.size:
        raise ConfigError(f"eval_size: must be in [1, {test_idx.size}]")
    eval_idx = test_idx[:eval_size]

    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, config), fingerprint)

    per_seed, rows = [], []
    for seed in seeds:
        model = init_model(arch, seed=derive_seed(seed, "init"))
        model = train(model, dataset, train_idx,
                      replace(train_cfg, seed=derive_seed(seed, "train")))
        base_scores = df_scores(model, dataset, train_idx, eval_idx, scope=scope)
        shift_scores = df_scores(model, shifted, train_idx, eval_idx, scope=scope)
        if base_scores.size != shift_scores.size:
            raise RuntimeError("evaluation sets have unequal sizes")
        per_seed.append({
            "seed": int(seed),
            "base_mean": float(base_scores.mean()),
            "base_median": float(np.median(base_scores)),
            "shifted_mean": float(shift_scores.mean()),
            "shifted_median": float(np.median(shift_scores)),
            "shifted_gt_base": bool(shift_scores.mean() > base_scores.mean()),
        })
        for i, s in zip(eval_idx, base_scores):
            rows.append([int(seed), "base", int(i), float(s)])
        for i, s in zip(eval_idx, shift_scores):
            rows.append([int(seed), "shifted", int(i), float(s)])

    scores_csv = out_dir / "scores.csv"
    write_table(scores_csv, fingerprint, ["seed", "set", "index", "score"], rows)
    shift_json = out_dir / "shift.json"
    write_json(shift_json, {
        "manifest": _embedded_manifest(fingerprint, config),
        "shift": [float(v) for v in shift],
        "n_eval": int(eval_size),
        "per_seed": per_seed,
    })
    write_json(out_dir / "manifest.json",
               _manifest("shift", fingerprint, config,
                         [scores_csv, shift_json], started, _timestamp()))
    print(f"shift complete: {out_dir}")
    return 0


# ---------------------------------------------------------------- contraction

def cmd_contraction(config: dict, out_flag=None) -> int:
    started = _timestamp()
    dataset = build_dataset(_get(config, "dataset", dict, required=True))
    section = _get(config, "contraction", dict, {})
    widths = _get(section, "hidden_widths", list, [64], where="contraction.")
    try:
        trace_cfg = ContractionConfig(
            s_size=_get(section, "s_size", int, 1000, where="contraction."),
            subset_fraction=_get(section, "subset_fraction", float, 0.1, where="contraction."),
            epochs=_get(section, "epochs", int, 150, where="contraction."),
            learning_rate=_get(section, "learning_rate", float, 1e-4, where="contraction."),
            seed=_get(section, "seed", int, 0, where="contraction."),
            scope=_get(section, "scope", str, "full", where="contraction."),
            hidden_widths=tuple(widths),
            momentum=_get(section, "momentum", float, 0.0, where="contraction."),
            minibatch_size=_get(section, "minibatch_size", int, 0, where="contraction."),
        )
    except ValueError as exc:
        raise ConfigError(f"contraction: {exc}") from exc

    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, config), fingerprint)

    try:
        report = run_contraction_trace(trace_cfg, dataset)
    except ValueError as exc:
        raise ConfigError(f"contraction: {exc}") from exc

    bound = None
    if report.t0_estimate is not None:
        lhs, rhs = cumulative_df_bound_check(report.df_norms, report.t0_estimate)
        bound = {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs * (1 + 1e-12))}

    trace_csv = out_dir / "trace.csv"
    write_table(trace_csv, fingerprint, ["epoch", "df_norm"],
                [[t, float(v)] for t, v in enumerate(report.df_norms)])
    report_json = out_dir / "report.json"
    write_json(report_json, {
        "manifest": _embedded_manifest(fingerprint, config),
        "df_norms": [float(v) for v in report.df_norms],
        "t0_estimate": report.t0_estimate,
        "violation_count_after_t0": report.violation_count_after_t0,
        "rho_hat": report.rho_hat,
        "bound_check": bound,
    })
    write_json(out_dir / "manifest.json",
               _manifest("contraction", fingerprint, config,
                         [trace_csv, report_json], started, _timestamp()))
    print(f"contraction complete: {out_dir}")
    return 0


# ---------------------------------------------------------------- timing

def cmd_timing(config: dict, out_flag=None) -> int:
    started = _timestamp()
    pool_size = _get(config, "pool_size", int, 25000)
    batch_size = _get(config, "batch_size", int, 500)
    rounds = _get(config, "rounds", int, 5)
    initial_size = _get(config, "initial_size", int, batch_size)
    seed = _get(config, "seed", int, 0)
    methods = _methods_from(config)
    scope = _scope_from(config)
    if pool_size < batch_size * rounds:
        raise ConfigError("pool_size: too small for rounds x batch_size")

    dataset_cfg = dict(_get(config, "dataset", dict, {}) or {})
    dataset_cfg.setdefault("kind", "blobs")
    if dataset_cfg["kind"] == "blobs":
        dataset_cfg.setdefault("n_classes", 10)
        dataset_cfg.setdefault("n_features", 20)
        dataset_cfg.setdefault("spread", 2.0)
        dataset_cfg.setdefault("n_samples", pool_size + initial_size)
    dataset = build_dataset(dataset_cfg)
    if dataset.n_samples < pool_size + initial_size:
        raise ConfigError("dataset.n_samples: smaller than pool_size + initial_size")
    arch = build_arch(_get(config, "model", dict, {"hidden_widths": [128, 64]}), dataset)
    train_cfg = build_train(_get(config, "train", dict, {"epochs": 3, "learning_rate": 0.01}))

    fingerprint = fingerprint_of(config)
    out_dir = _prepare_dir(resolve_out_dir(out_flag, config), fingerprint)

    base = init_pool(np.arange(dataset.n_samples), initial_size, seed)
    start_pool = PoolState(labeled=base.labeled, unlabeled=base.unlabeled[:pool_size])
    model = init_model(arch, seed=derive_seed(seed, "init"))
    model = train(model, dataset, start_pool.labeled,
                  replace(train_cfg, seed=derive_seed(seed, "train")))

    per_method = {}
    for method in methods:
        pool = start_pool
        seconds = []
        for r in range(rounds):
            rng = Rng(seed).derive(f"timing/{method}/round{r}")
            batch, elapsed = timed_select(method, model, dataset, pool,
                                          batch_size, rng, scope=scope)
            seconds.append(elapsed)
            pool = pool.acquire(batch.indices)
        arr = np.asarray(seconds)
        per_method[method] = {
            "round_seconds": [float(s) for s in seconds],
            "mean_seconds": float(arr.mean()),
            "sd_seconds": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        }

    ordering = None
    if "entropy" in per_method and "grad" in per_method:
        ordering = bool(per_method["entropy"]["mean_seconds"]
                        < per_method["grad"]["mean_seconds"])

    timing_csv = out_dir / "timing.csv"
    write_table(timing_csv, fingerprint, ["method", "mean_seconds", "sd_seconds"],
                [[m, per_method[m]["mean_seconds"], per_method[m]["sd_seconds"]]
                 for m in methods])
    timing_json = out_dir / "timing.json"
    write_json(timing_json, {
        "manifest": _embedded_manifest(fingerprint, config),
        "pool_size": pool_size,
        "batch_size": batch_size,
        "rounds": rounds,
        "per_method": per_method,
        "entropy_faster_than_grad": ordering,
    })
    write_json(out_dir / "manifest.json",
               _manifest("timing", fingerprint, config,
                         [timing_csv, timing_json], started, _timestamp()))
    for m in methods:
        entry = per_method[m]
        print(f"{m}: {entry['mean_seconds']:.3f} +/- {entry['sd_seconds']:.3f} s")
    if ordering is not None:
        print(f"entropy faster than grad: {ordering}")
    return 0


# ---------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradal",
        description="Active-learning experiments with gradient-discrepancy acquisition.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_verb(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default=None, help="output directory root")
        return p

    run_p = add_config_verb("run", "run acquisition experiments")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker threads across seeds")

    cmp_p = sub.add_parser("compare", help="aggregate results into a penalty matrix")
    cmp_p.add_argument("--results", required=True, help="directory of results.json runs")
    cmp_p.add_argument("--slice", default="all",
                       help="all|early|late|by-dataset:<name>|by-arch:<name>")
    cmp_p.add_argument("--alpha", type=float, default=0.05, help="FDR level")
    cmp_p.add_argument("--out", default=None, help="output directory root")

    add_config_verb("geometry", "single-round acquisition geometry dump")
    add_config_verb("shift", "DF score distributions under covariate shift")
    add_config_verb("contraction", "gradient-discrepancy trace over training")
    add_config_verb("timing", "acquisition wall-time comparison")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            return cmd_run(load_config(args.config), args.out, threads=args.threads)
        if args.verb == "compare":
            return cmd_compare(args.results, args.slice, args.alpha, args.out)
        if args.verb == "geometry":
            return cmd_geometry(load_config(args.config), args.out)
        if args.verb == "shift":
            return cmd_shift(load_config(args.config), args.out)
        if args.verb == "contraction":
            return cmd_contraction(load_config(args.config), args.out)
        if args.verb == "timing":
            return cmd_timing(load_config(args.config), args.out)
        raise ConfigError(f"unknown verb {args.verb!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
