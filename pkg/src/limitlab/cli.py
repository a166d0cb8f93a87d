"""Command-line surface.

Subcommands: corrupt, bound, train, detect, report. Relative dataset
paths fall back to $LIMITLAB_DATA_DIR when they do not resolve from the
working directory. Exit codes: 0 success, 1 usage, 2 format error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import os
import sys
from pathlib import Path

from . import bounds, detect, kernels, noise, runio, training
from .data import Dataset, gen_synthetic, load_dataset, load_idx, save_dataset, split_dataset
from .errors import ConfigError, FormatError, InputError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message)


def _resolve_path(path: str) -> str:
    """Resolve a dataset path, falling back to $LIMITLAB_DATA_DIR."""
    p = Path(path)
    if p.is_absolute() or p.exists() or p.with_suffix(".json").exists():
        return str(p)
    root = os.environ.get("LIMITLAB_DATA_DIR")
    if root:
        candidate = Path(root) / p
        if candidate.exists() or candidate.with_suffix(".json").exists():
            return str(candidate)
    return str(p)


def _parse_pairs(text: str) -> dict[int, int]:
    pairs = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            src, dst = item.split(":")
            pairs[int(src)] = int(dst)
        except ValueError as exc:
            raise InputError(f"bad pair {item!r}; expected 'src:dst'") from exc
    if not pairs:
        raise InputError("empty pair map")
    return pairs


def _noise_spec_from_dict(d: dict) -> noise.NoiseSpec:
    pairs = d.get("pairs")
    if isinstance(pairs, dict):
        pairs = {int(k): int(v) for k, v in pairs.items()}
    elif isinstance(pairs, str):
        pairs = _parse_pairs(pairs)
    return noise.NoiseSpec(
        family=d.get("family", "none"),
        p=float(d.get("p", 0.0)),
        pair_map=pairs,
        seed=int(d.get("seed", 0)),
    )


# ---------------------------------------------------------------------------
# experiment configuration


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    dataset: dict
    splits: dict
    noise: dict
    train: dict
    out_dir: str
    seed: int
    sweep: dict | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("dataset", "train", "out_dir", "seed"):
            if key not in raw:
                raise ConfigError(f"config missing required key {key!r}")
        raw.setdefault("noise", {"family": "none"})
        raw.setdefault("splits", {})
        return cls(**raw)


def _load_source(dataset_cfg: dict) -> tuple[Dataset, Dataset | None]:
    """Returns (data, held_out_test). IDX sources may name a separate
    test image/label pair; otherwise the test split comes off the end of
    the main dataset."""
    kind = dataset_cfg.get("type")
    if kind == "synthetic":
        data = gen_synthetic(
            n=int(dataset_cfg["n"]),
            k=int(dataset_cfg["k"]),
            d=int(dataset_cfg["d"]),
            separation=float(dataset_cfg.get("separation", 4.0)),
            seed=int(dataset_cfg.get("seed", 0)),
        )
        return data, None
    if kind == "idx":
        data = load_idx(
            _resolve_path(dataset_cfg["images"]), _resolve_path(dataset_cfg["labels"])
        )
        test = None
        if "test_images" in dataset_cfg:
            test = load_idx(
                _resolve_path(dataset_cfg["test_images"]),
                _resolve_path(dataset_cfg["test_labels"]),
            )
        return data, test
    if kind == "file":
        return load_dataset(_resolve_path(dataset_cfg["path"])), None
    raise ConfigError(f"dataset type must be synthetic|idx|file, got {kind!r}")


def _split_experiment(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    data, held_out_test = _load_source(cfg.dataset)
    splits = dict(cfg.splits)
    if cfg.dataset.get("type") == "idx" and not splits:
        splits = {"train": 48_000, "val": 12_000}  # standard 60k train-file split
    try:
        n_train = int(splits["train"])
        n_val = int(splits["val"])
    except KeyError as exc:
        raise ConfigError(f"splits must provide {exc.args[0]!r}") from exc
    if held_out_test is not None:
        n_test = int(splits.get("test", held_out_test.n))
        if n_train + n_val > data.n or n_test > held_out_test.n:
            raise ConfigError("split sizes exceed the available data")
        return (
            data.slice(0, n_train),
            data.slice(n_train, n_train + n_val),
            held_out_test.slice(0, n_test),
        )
    return split_dataset(data, n_train, n_val, int(splits["test"]))


_TRAIN_KEY_MAP = {"lambda": "lam"}
_TRAIN_KEYS = {
    "method", "hidden", "dist", "sample_g", "init_from_ce", "lam", "beta",
    "sigma_q", "sigma_xi", "lr", "beta1", "beta2", "eps", "batch_size",
    "epochs", "patience", "seed_init", "seed_shuffle", "seed_method",
}


def _train_config(train_dict: dict, global_seed: int) -> training.TrainConfig:
    kwargs = {}
    for key, value in train_dict.items():
        key = _TRAIN_KEY_MAP.get(key, key)
        if key not in _TRAIN_KEYS:
            raise ConfigError(f"unknown train option {key!r}")
        kwargs[key] = tuple(value) if key == "hidden" else value
    if not {"seed_init", "seed_shuffle", "seed_method"} <= kwargs.keys():
        init, shuffle, method = training.derive_seeds(global_seed)
        kwargs.setdefault("seed_init", init)
        kwargs.setdefault("seed_shuffle", shuffle)
        kwargs.setdefault("seed_method", method)
    return training.TrainConfig(**kwargs)


def _snapshot(cfg: ExperimentConfig, tc: training.TrainConfig) -> dict:
    d = dataclasses.asdict(cfg)
    resolved = dataclasses.asdict(tc)
    resolved["hidden"] = list(resolved["hidden"])
    d["train"] = resolved
    d["backend"] = kernels.BACKEND
    return d


# ---------------------------------------------------------------------------
# subcommands


def cmd_corrupt(args) -> int:
    data = load_dataset(_resolve_path(args.infile))
    pairs = _parse_pairs(args.pairs) if args.pairs else None
    spec = noise.NoiseSpec(family=args.family, p=args.p, pair_map=pairs, seed=args.seed)
    corrupted = noise.corrupt(data, spec)
    save_dataset(corrupted, args.out)
    changed = int((corrupted.labels != corrupted.clean_labels).sum())
    print(json.dumps({
        "n": corrupted.n,
        "changed": changed,
        "empirical_rate": changed / corrupted.n,
        "family": spec.family,
        "p": spec.p,
        "seed": spec.seed,
    }, sort_keys=True))
    return EXIT_OK


def cmd_bound(args) -> int:
    if args.hyx is None and args.uniform_p is None:
        raise InputError("provide --hyx or --uniform-p")
    if args.k is None:
        raise InputError("--k is required")
    if args.hyx is not None:
        h = args.hyx
    else:
        spec = noise.NoiseSpec(family="uniform", p=args.uniform_p)
        h = noise.conditional_entropy_bits(spec, args.k)
    result = bounds.fano_error_lower_bound(
        bounds.BoundQuery(h, args.budget_bits, args.k), args.tol
    )
    print(json.dumps({
        "r0": result.r0,
        "solver_iterations": result.solver_iterations,
        "residual": result.residual,
        "h_y_given_x_bits": h,
        "budget_bits": args.budget_bits,
        "k": args.k,
    }, sort_keys=True))
    return EXIT_OK


def _run_one(cfg: ExperimentConfig, tc: training.TrainConfig, out_dir: Path) -> dict:
    d_train, d_val, d_test = _split_experiment(cfg)
    spec = _noise_spec_from_dict(cfg.noise)
    if spec.family != "none":
        d_train = noise.corrupt(d_train, spec)
        d_val = noise.corrupt(d_val, spec.with_seed(next(training.splitmix64(spec.seed))))
    run = training.train(d_train, d_val, d_test, tc)
    record = runio.save_run(out_dir, run, _snapshot(cfg, tc), spec, d_train.n, d_train.k)
    record["run_dir"] = str(out_dir)
    return record


def _sweep_grid(tc: training.TrainConfig, sweep_cfg: dict | None):
    sweep_cfg = sweep_cfg or {}
    if tc.method == "limit":
        betas = sweep_cfg.get("beta", training.BETA_GRID)
        sigmas = sweep_cfg.get("sigma_q", training.SIGMA_Q_GRID) if tc.sample_g else [tc.sigma_q]
        return [
            {"beta": float(b), "sigma_q": float(s)}
            for b, s in itertools.product(betas, sigmas)
        ]
    if tc.method == "soft_reg":
        lams = sweep_cfg.get("lambda", training.SOFT_REG_LAMBDA_GRID)
        betas = sweep_cfg.get("beta", training.SOFT_REG_BETA_GRID)
        return [
            {"lam": float(l), "beta": float(b)}
            for l, b in itertools.product(lams, betas)
        ]
    if tc.method in ("ce_gn", "ce_ln"):
        sigmas = sweep_cfg.get("sigma_q", training.SIGMA_Q_GRID)
        return [{"sigma_q": float(s)} for s in sigmas]
    return [{}]


def cmd_train(args) -> int:
    cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    tc = _train_config(cfg.train, cfg.seed)
    out_root = Path(args.out or cfg.out_dir)
    if not args.sweep:
        record = _run_one(cfg, tc, out_root)
        print(json.dumps(record, sort_keys=True))
        return EXIT_OK

    grid = _sweep_grid(tc, cfg.sweep)
    results = []
    for i, overrides in enumerate(grid):
        sub_tc = dataclasses.replace(tc, **overrides)
        tag = "_".join(f"{k}={v}" for k, v in overrides.items()) or "base"
        sub_dir = out_root / f"sweep_{i:03d}_{tag}"
        record = _run_one(cfg, sub_tc, sub_dir)
        record["overrides"] = overrides
        results.append(record)
    best = max(results, key=lambda r: r["best_val_acc"])
    summary = {
        "n_runs": len(results),
        "best_run_dir": best["run_dir"],
        "best_overrides": best["overrides"],
        "best_val_acc": best["best_val_acc"],
        "test_acc_at_best": best["test_acc_at_best"],
        "runs": [
            {
                "run_dir": r["run_dir"],
                "overrides": r["overrides"],
                "best_val_acc": r["best_val_acc"],
                "test_acc_at_best": r["test_acc_at_best"],
            }
            for r in results
        ],
    }
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "sweep_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_detect(args) -> int:
    run_dir = Path(args.run)
    summary = runio.load_run_summary(run_dir)
    if not summary.get("aux_checkpoint"):
        raise ConfigError("detection requires a completed run with an auxiliary network")
    classifier, _ = runio.load_checkpoint(run_dir / summary["checkpoint"])
    auxiliary, _ = runio.load_checkpoint(run_dir / summary["aux_checkpoint"])
    data = load_dataset(_resolve_path(args.data))
    report = detect.score_examples(classifier, auxiliary, data, distance=args.distance)
    out_base = Path(args.out) if args.out else run_dir / "detect"
    out_base.parent.mkdir(parents=True, exist_ok=True)
    out_base.with_suffix(".csv").write_text(runio.detection_csv_text(report))
    report_summary = runio.detection_summary(report)
    out_base.with_suffix(".json").write_text(
        json.dumps(report_summary, sort_keys=True, indent=2) + "\n"
    )
    summary["detection_report"] = out_base.with_suffix(".csv").name
    (run_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(json.dumps({
        "n": report_summary["n"],
        "roc_auc": report_summary["roc_auc"],
        "csv": str(out_base.with_suffix(".csv")),
        "json": str(out_base.with_suffix(".json")),
    }, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    summary = runio.load_run_summary(run_dir)
    report = dict(summary)
    report["run_dir"] = str(run_dir)
    detection = summary.get("detection_report")
    if detection:
        det_json = (run_dir / detection).with_suffix(".json")
        if det_json.exists():
            det = json.loads(det_json.read_text())
            report["detection"] = {"roc_auc": det.get("roc_auc"), "n": det.get("n")}
    print(json.dumps(report, sort_keys=True, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="limitlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="corrupt a dataset's labels")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--family", choices=("uniform", "pair", "none"), default="uniform")
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--pairs", help="pair map like '9:1,2:0'")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("bound", help="training-error lower bound")
    p.add_argument("--hyx", type=float, help="H(y|x) in bits per sample")
    p.add_argument("--uniform-p", type=float, help="uniform noise probability")
    p.add_argument("--k", type=int)
    p.add_argument("--budget-bits", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--sweep", action="store_true", help="grid-search hyperparameters")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="score examples for mislabeling")
    p.add_argument("--run", required=True, help="completed run directory")
    p.add_argument("--data", required=True, help="dataset to score")
    p.add_argument("--out", help="output base path (default <run>/detect)")
    p.add_argument("--distance", choices=("l2", "l1"), default="l2")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", help="assemble a run's record")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_USAGE
        return exc.code if exc.code else EXIT_OK
    except (InputError, ConfigError) as exc:
        print(f"limitlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"limitlab: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"limitlab: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (NumericError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"limitlab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
