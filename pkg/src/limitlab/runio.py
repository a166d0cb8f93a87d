"""Run persistence: checkpoints, metrics CSV, and run-record assembly.

Checkpoints are little-endian float64 blobs with a JSON sidecar header so
they stay parseable from any language. All writers are byte-deterministic
for identical inputs.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import bounds, noise, training
from .errors import FormatError
from .nn import MlpModel

METRICS_HEADER = "epoch,split,accuracy,loss,info_budget_bits"


def _json_float(x: float):
    return None if math.isinf(x) or math.isnan(x) else x


def save_checkpoint(path_base, model: MlpModel, seed: int, epoch: int) -> Path:
    """Write ``<base>.json`` + ``<base>.bin``; returns the json path."""
    base = Path(path_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    arrays = []
    blob = bytearray()
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        for name, arr in ((f"w{i}", w), (f"b{i}", b)):
            arrays.append({"name": name, "shape": list(arr.shape), "offset": len(blob)})
            blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    header = {
        "format": "limitlab-checkpoint-v1",
        "layer_dims": [int(d) for d in model.layer_dims],
        "seed": int(seed),
        "epoch": int(epoch),
        "arrays": arrays,
        "bin_file": base.name + ".bin",
    }
    base.with_suffix(".bin").write_bytes(bytes(blob))
    base.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return base.with_suffix(".json")


def load_checkpoint(path_base) -> tuple[MlpModel, dict]:
    base = Path(path_base)
    if base.suffix == ".json":
        base = base.with_suffix("")
    meta_path = base.with_suffix(".json")
    if not meta_path.exists():
        raise FormatError(f"{meta_path}: no such checkpoint")
    header = json.loads(meta_path.read_text())
    if header.get("format") != "limitlab-checkpoint-v1":
        raise FormatError(f"{meta_path}: unknown format {header.get('format')!r}")
    blob = (base.parent / header["bin_file"]).read_bytes()
    dims = header["layer_dims"]
    weights, biases = [], []
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = (
            np.frombuffer(blob, dtype="<f8", count=count, offset=spec["offset"])
            .reshape(shape)
            .copy()
        )
        (weights if spec["name"].startswith("w") else biases).append(arr)
    return MlpModel(dims, weights, biases), header


def metrics_csv_text(run: training.TrainRun) -> str:
    """Fixed-schema CSV: epoch,split,accuracy,loss,info_budget_bits."""
    lines = [METRICS_HEADER]
    for epoch in range(run.n_epochs_run):
        budget = run.budget_bits[epoch]
        for split, acc, loss in (
            ("train", run.train_acc[epoch], run.train_loss[epoch]),
            ("val", run.val_acc[epoch], run.val_loss[epoch]),
            ("test", run.test_acc[epoch], run.test_loss[epoch]),
        ):
            lines.append(f"{epoch},{split},{acc!r},{loss!r},{budget!r}")
    return "\n".join(lines) + "\n"


def bound_summary(run: training.TrainRun, noise_spec: noise.NoiseSpec,
                  n_train: int, k: int, tol: float = 1e-6) -> dict:
    """Error lower bound implied by the run's accumulated budget."""
    h = noise.conditional_entropy_bits(noise_spec, k)
    per_sample = run.info_budget_bits / n_train
    result = bounds.fano_error_lower_bound(bounds.BoundQuery(h, per_sample, k), tol)
    best = run.best_epoch
    return {
        "h_y_given_x_bits": h,
        "info_budget_bits": _json_float(run.info_budget_bits),
        "budget_bits_per_sample": _json_float(per_sample),
        "budget_unbounded": math.isinf(run.info_budget_bits),
        "n_train": int(n_train),
        "k": int(k),
        "r0": result.r0,
        "solver_iterations": result.solver_iterations,
        "residual": result.residual,
        "noisy_train_error_at_best": 1.0 - run.train_acc[best] if best >= 0 else None,
    }


def save_run(run_dir, run: training.TrainRun, config_snapshot: dict,
             noise_spec: noise.NoiseSpec, n_train: int, k: int) -> dict:
    """Persist a completed run; returns the run-record summary dict."""
    out = Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config_snapshot, sort_keys=True, indent=2) + "\n")
    (out / "metrics.csv").write_text(metrics_csv_text(run))
    save_checkpoint(out / "classifier_best", run.best_classifier,
                    run.config.seed_init, run.best_epoch)
    record = {
        "format": "limitlab-run-v1",
        "config": "config.json",
        "metrics_csv": "metrics.csv",
        "checkpoint": "classifier_best",
        "aux_checkpoint": None,
        "detection_report": None,
        "method": run.config.method,
        "epochs_run": run.n_epochs_run,
        "best_epoch": run.best_epoch,
        "best_val_acc": run.best_val_acc,
        "test_acc_at_best": run.test_acc[run.best_epoch],
        "train_acc_at_best": run.train_acc[run.best_epoch],
        "bound_summary": bound_summary(run, noise_spec, n_train, k),
    }
    if run.best_auxiliary is not None:
        save_checkpoint(out / "aux_best", run.best_auxiliary,
                        run.config.seed_init, run.best_epoch)
        record["aux_checkpoint"] = "aux_best"
    (out / "summary.json").write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")
    return record


def load_run_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise FormatError(f"{path}: no run summary found")
    return json.loads(path.read_text())


def detection_csv_text(report) -> str:
    lines = ["index,noisy_label,clean_label,grad_distance,mu_norm"]
    clean = report.clean_labels
    for i in range(report.indices.size):
        c = "" if clean is None else str(int(clean[i]))
        lines.append(
            f"{int(report.indices[i])},{int(report.noisy_labels[i])},{c},"
            f"{float(report.grad_distance[i])!r},{float(report.mu_norm[i])!r}"
        )
    return "\n".join(lines) + "\n"


def detection_summary(report, n_bins: int = 30, n_top: int = 100) -> dict:
    from .detect import histogram

    dist_edges, dist_counts = histogram(report.grad_distance, n_bins)
    norm_edges, norm_counts = histogram(report.mu_norm, n_bins)
    return {
        "n": int(report.indices.size),
        "roc_auc": report.roc_auc,
        "grad_distance_histogram": {
            "edges": [float(e) for e in dist_edges],
            "counts": [int(c) for c in dist_counts],
        },
        "mu_norm_histogram": {
            "edges": [float(e) for e in norm_edges],
            "counts": [int(c) for c in norm_counts],
        },
        "top_suspects": [int(i) for i in report.top_suspects[:n_top]],
        "top_suspects_per_class": {
            str(c): idxs[:n_top] for c, idxs in sorted(report.top_suspects_per_class.items())
        },
    }
