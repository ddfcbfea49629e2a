"""
Command-line front end.

.. code-block:: bash

    nsotree simulate --risk gaussian --out data
    nsotree train --train data/train.csv --valid data/valid.csv \\
        --batch 256 --patience 30 --out run
    nsotree eval --checkpoint run/checkpoint.json --test data/test.csv \\
        --truth data/truth.json --bootstrap 1000 --out run
    nsotree extract --checkpoint run/checkpoint.json --data data/test.csv \\
        --layers 3 --format dot --out run
    nsotree sweep --kind depth --start 1 --stop 40 --step 2 --batch 256 \\
        --train data/train.csv --valid data/valid.csv --test data/test.csv
    nsotree crossval --data support.csv --schema schemas/support.ini --folds 5

Every command takes `--config FILE`, an INI file whose `[nsotree]` section
sets defaults for the command's flags (`depth = 20`, `lr = 0.05`, ...), and
writes `manifest.json` next to its outputs. Flags given on the command line
win over the file.
"""

import argparse
import asyncio
import configparser
import dataclasses
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy

import nsotree
from nsotree import checkpoint
from nsotree.asyncio import trainer as async_trainer
from nsotree.errors import NSOTreeError
from nsotree.ingest import (
    ColumnSpec,
    align_features,
    apply_standardization,
    load_csv,
    load_schema,
    standardize,
)
from nsotree.metrics import (
    MetricResult,
    bootstrap_ci,
    brier_curve,
    concordance_index,
    default_time_grid,
    integrated_brier,
    pearson_correlation,
    predict_survival,
)
from nsotree.simulate import (
    SimConfig,
    load_sim_config,
    load_true_risk,
    simulate,
    true_risk,
    write_simulation,
)
from nsotree.survival import StepFunction, SurvivalDataset, breslow_baseline
from nsotree.trainer import (
    SweepRow,
    TrainConfig,
    cross_validate,
    depth_sweep,
    lambda_sweep,
    predict_risk,
    report_to_csv,
    train,
)
from nsotree.tree import annotate_splits, export_tree, extract_tree, truncate
from nsotree.utils import file_sha256

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "NSOTREE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "nsotree-out"
CONFIG_SECTION = "nsotree"
MANIFEST_NAME = "manifest.json"

_BOOLEAN_KEYS = {"standardize", "expand", "verbose"}
_LIST_KEYS = {"values"}
_NOT_RECORDED = {"handler", "config", "verbose"}


class UsageError(Exception):
    """
    Invalid combination of flags, reported like an argparse error.
    """


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command: str

    config: Dict[str, Any]
    """
    Every flag after defaults, the config file and the command line were
    merged.
    """

    inputs: Dict[str, Dict[str, str]]
    """
    Path and SHA-256 of every input file, keyed by flag.
    """

    seed: Optional[int]

    artifacts: List[str]
    """
    Files the run wrote, relative to the output directory.
    """

    versions: Dict[str, str]


def versions() -> Dict[str, str]:
    return {
        "nsotree": nsotree.__version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "python": platform.python_version(),
    }


def write_manifest(out: Path, manifest: RunManifest) -> Path:
    path = out / MANIFEST_NAME
    _write_text(path, json.dumps(dataclasses.asdict(manifest), indent=2, sort_keys=True) + "\n")
    return path


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def _write_frame(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8", lineterminator="\n")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    args.out = str(out)
    return out


def _resolved_config(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_RECORDED}


def _inputs(args: argparse.Namespace, *names: str) -> Dict[str, Dict[str, str]]:
    inputs = {}
    for name in names:
        path = getattr(args, name, None)
        if path is not None:
            inputs[name] = {"path": str(path), "sha256": file_sha256(path)}
    return inputs


def _finish(
    args: argparse.Namespace,
    out: Path,
    artifacts: Sequence[Path],
    inputs: Dict[str, Dict[str, str]],
    seed: Optional[int],
) -> None:
    manifest = RunManifest(
        command=args.command,
        config=_resolved_config(args),
        inputs=inputs,
        seed=seed,
        artifacts=sorted(p.name for p in artifacts),
        versions=versions(),
    )
    write_manifest(out, manifest)
    logger.info("Wrote %s to %s", ", ".join(manifest.artifacts), out)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"{args.command} requires {', '.join(missing)}")


def _schema(path: Optional[str]) -> Optional[List[ColumnSpec]]:
    return None if path is None else load_schema(path)


def _train_config(args: argparse.Namespace) -> TrainConfig:
    values = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(TrainConfig)
        if getattr(args, f.name, None) is not None
    }
    return TrainConfig(**values)


def _prepare(dataset: SurvivalDataset, ckpt: checkpoint.Checkpoint) -> SurvivalDataset:
    """
    Bring a raw dataset into the covariate space of a checkpoint.
    """

    names = ckpt.feature_names or dataset.feature_names
    dataset = align_features(dataset, names)
    if ckpt.standardization is not None:
        dataset = apply_standardization(dataset, ckpt.standardization, names)
    if dataset.dim != ckpt.params.input_dim:
        raise NSOTreeError(
            f"The checkpoint expects {ckpt.params.input_dim} covariates, the data has {dataset.dim}"
        )
    return dataset


def _load_training_sets(
    args: argparse.Namespace, *names: str
) -> List[SurvivalDataset]:
    """
    Load the files behind `names`, aligned to the first one's features and
    standardized with its statistics when `--standardize` is set.
    """

    schema = _schema(args.schema)
    first, *rest = [load_csv(getattr(args, n), schema) for n in names]
    others = [align_features(d, first.feature_names) for d in rest]
    if args.standardize:
        return standardize(first, others)
    return [first, *others]


def cmd_simulate(args: argparse.Namespace) -> None:
    sizes = {}
    if args.n is not None:
        if args.n < 6:
            raise UsageError("--n must be at least 6")
        sizes = {"n_train": args.n - 2 * (args.n // 6), "n_valid": args.n // 6, "n_test": args.n // 6}
    for name in ("n_train", "n_valid", "n_test"):
        if getattr(args, name) is not None:
            sizes[name] = getattr(args, name)

    options = {
        name: getattr(args, name)
        for name in ("risk", "dim", "lambda_max", "scale", "baseline_rate", "censor_fraction", "seed")
        if getattr(args, name) is not None
    }
    config = SimConfig(**sizes, **options)

    out = _out_dir(args)
    paths = write_simulation(simulate(config), out)
    _finish(args, out, list(paths.values()), {}, config.seed)


def cmd_train(args: argparse.Namespace) -> None:
    _require(args, "train", "valid")
    config = _train_config(args)
    train_set, valid = _load_training_sets(args, "train", "valid")

    report = train(train_set, valid, config)
    logger.info(
        "Best epoch %d: validation C-index %.4f, sparsity %.4f",
        report.best_epoch,
        report.best_cindex,
        report.sparsity,
    )

    ckpt = checkpoint.Checkpoint(
        params=report.params,
        activation=config.eval_activation,
        feature_names=train_set.feature_names,
        standardization=train_set.standardization,
        train_path=str(args.train),
        config={**dataclasses.asdict(config), "schema": args.schema},
    )

    out = _out_dir(args)
    ckpt_path = out / "checkpoint.json"
    report_path = out / "report.csv"
    checkpoint.save(ckpt, ckpt_path)
    _write_text(report_path, report_to_csv(report))
    _finish(args, out, [ckpt_path, report_path], _inputs(args, "train", "valid", "schema"), config.seed)


def _risk_table(
    raw: SurvivalDataset, scores: np.ndarray, truth: Optional[np.ndarray]
) -> pd.DataFrame:
    """
    One row per record: the first two covariates on their input scale, the
    outcome, the predicted log-risk and the true one when it is known.
    """

    frame = pd.DataFrame({name: raw.x[:, j] for j, name in enumerate(raw.feature_names[:2])})
    frame["time"] = raw.time
    frame["event"] = raw.event.astype(np.int64)
    frame["predicted"] = scores
    if truth is not None:
        frame["true"] = truth
    return frame


def _risk_surface(
    raw: SurvivalDataset,
    ckpt: checkpoint.Checkpoint,
    points: int,
    sim_config: Optional[SimConfig],
) -> pd.DataFrame:
    """
    Predicted log-risk on a points x points grid over the range of the first
    two covariates, the others held at their medians.
    """

    axes = [np.linspace(raw.x[:, j].min(), raw.x[:, j].max(), points) for j in (0, 1)]
    first, second = np.meshgrid(*axes, indexing="ij")
    x = np.tile(np.median(raw.x, axis=0), (first.size, 1))
    x[:, 0], x[:, 1] = first.ravel(), second.ravel()

    scaled = x
    if ckpt.standardization is not None:
        scaled = (x - ckpt.standardization.mean) / ckpt.standardization.std

    frame = pd.DataFrame(
        {
            raw.feature_names[0]: x[:, 0],
            raw.feature_names[1]: x[:, 1],
            "predicted": predict_risk(ckpt.params, scaled, ckpt.activation),
        }
    )
    if sim_config is not None:
        frame["true"] = true_risk(x, sim_config)
    return frame


def _survival_table(curves: Sequence[StepFunction], grid: np.ndarray) -> pd.DataFrame:
    """
    Long format: one row per (record, grid time) with S(t | x).
    """

    values = np.stack([curve(grid) for curve in curves])
    return pd.DataFrame(
        {
            "subject": np.repeat(np.arange(len(curves)), grid.size),
            "time": np.tile(grid, len(curves)),
            "survival": values.reshape(-1),
        }
    )


def cmd_eval(args: argparse.Namespace) -> None:
    _require(args, "checkpoint", "test")
    ckpt = checkpoint.load(args.checkpoint)
    schema_path = args.schema or ckpt.config.get("schema")
    schema = _schema(schema_path)
    if args.surface_points < 2:
        raise UsageError("--surface-points must be at least 2")
    loaded = load_csv(args.test, schema)
    test = _prepare(loaded, ckpt)
    raw = align_features(loaded, test.feature_names)

    if ckpt.train_path is None:
        raise NSOTreeError("The checkpoint records no training data to fit the baseline hazard on")
    if not Path(ckpt.train_path).is_file():
        raise NSOTreeError(f"Training data {ckpt.train_path} recorded in the checkpoint is missing")

    params, mode = ckpt.params, ckpt.activation
    reference = _prepare(load_csv(ckpt.train_path, schema), ckpt)
    baseline = breslow_baseline(reference, predict_risk(params, reference.x, mode))

    scores = predict_risk(params, test.x, mode)
    if args.bootstrap > 0:
        cindex = bootstrap_ci(
            lambda data: concordance_index(predict_risk(params, data.x, mode), data.time, data.event),
            test,
            resamples=args.bootstrap,
            seed=args.seed,
        )
    else:
        cindex = MetricResult(point=concordance_index(scores, test.time, test.event))

    curves = predict_survival(baseline, scores)
    grid = default_time_grid(test, args.grid_points)
    brier = brier_curve(curves, test, grid)
    ibs = integrated_brier(curves, test, grid)

    truth, sim_config, pearson = None, None, None
    if args.truth is not None:
        truth = load_true_risk(args.truth, args.truth_split)
        sim_config = load_sim_config(args.truth)
        pearson = pearson_correlation(scores, truth)

    logger.info("Test C-index %.4f, IBS %.4f", cindex.point, ibs)
    if cindex.interval is not None:
        logger.info("C-index 95%% interval (%.4f, %.4f)", cindex.lower, cindex.upper)
    if pearson is not None:
        logger.info("Pearson r against the true risk %.4f", pearson)

    tables = {
        "risk.csv": _risk_table(raw, scores, truth),
        "survival.csv": _survival_table(curves, grid),
    }
    if raw.dim >= 2:
        tables["surface.csv"] = _risk_surface(raw, ckpt, args.surface_points, sim_config)

    out = _out_dir(args)
    brier_path = out / "brier.csv"
    metrics_path = out / "metrics.json"
    _write_frame(pd.DataFrame({"time": grid, "brier": brier}), brier_path)
    for name, frame in tables.items():
        _write_frame(frame, out / name)
    metrics = {
        "cindex": cindex.point,
        "cindex_lower": cindex.lower,
        "cindex_upper": cindex.upper,
        "bootstrap": args.bootstrap,
        "ibs": ibs,
        "pearson_r": pearson,
        "n": len(test),
        "events": test.n_events,
    }
    _write_text(metrics_path, json.dumps(metrics, indent=2, sort_keys=True) + "\n")

    inputs = _inputs(args, "checkpoint", "test", "truth")
    inputs["train"] = {"path": ckpt.train_path, "sha256": file_sha256(ckpt.train_path)}
    if schema_path is not None:
        inputs["schema"] = {"path": str(schema_path), "sha256": file_sha256(schema_path)}
    artifacts = [brier_path, metrics_path, *(out / name for name in tables)]
    _finish(args, out, artifacts, inputs, args.seed)


def cmd_extract(args: argparse.Namespace) -> None:
    _require(args, "checkpoint")
    if args.expand and args.format != "dot":
        raise UsageError("--expand needs --format dot")

    ckpt = checkpoint.load(args.checkpoint)
    tree = extract_tree(ckpt.params, ckpt.feature_names or None)
    if args.data is not None:
        schema = _schema(args.schema or ckpt.config.get("schema"))
        tree = annotate_splits(tree, _prepare(load_csv(args.data, schema), ckpt))

    out = _out_dir(args)
    tree_path = out / f"tree.{args.format}"
    _write_text(tree_path, export_tree(tree, args.format, args.layers, args.expand))
    artifacts = [tree_path]

    view = tree if args.layers is None else truncate(tree, args.layers)
    if view.annotations is not None:
        rows = [
            {
                "layer": s.layer,
                "unit": s.unit,
                "threshold": s.threshold,
                "n_on": a.n_on,
                "n_off": a.n_off,
                "statistic": a.statistic,
                "p_value": a.p_value,
                "degenerate": int(a.degenerate),
            }
            for s, a in zip(view.splits, view.annotations)
        ]
        splits_path = out / "splits.csv"
        _write_frame(pd.DataFrame(rows), splits_path)
        artifacts.append(splits_path)

    _finish(args, out, artifacts, _inputs(args, "checkpoint", "data", "schema"), None)


def _sweep_values(args: argparse.Namespace) -> List[Union[int, float]]:
    if args.values:
        values = list(args.values)
    elif args.start is not None and args.stop is not None:
        if args.kind != "depth":
            raise UsageError("A lambda sweep takes its grid from --values")
        step = args.step or 1
        if step <= 0:
            raise UsageError("--step must be positive")
        values = list(range(int(args.start), int(args.stop) + 1, int(step)))
    else:
        raise UsageError("sweep requires --values or --start and --stop")

    if args.kind == "depth":
        if any(float(v) != int(v) for v in values):
            raise UsageError("Depths must be integers")
        return [int(v) for v in values]
    return [float(v) for v in values]


async def _sweep_concurrently(
    kind: str,
    datasets: Sequence[SurvivalDataset],
    values: Sequence[Any],
    config: TrainConfig,
    workers: int,
) -> List[SweepRow]:
    train_set, valid, test = datasets
    with ProcessPoolExecutor(max_workers=workers) as pool:
        if kind == "depth":
            return await async_trainer.depth_sweep(train_set, valid, test, values, config, executor=pool)
        return await async_trainer.lambda_sweep(train_set, valid, test, values, config, executor=pool)


def cmd_sweep(args: argparse.Namespace) -> None:
    _require(args, "train", "valid", "test")
    values = _sweep_values(args)
    config = _train_config(args)
    datasets = _load_training_sets(args, "train", "valid", "test")

    if args.workers > 1:
        rows = asyncio.run(_sweep_concurrently(args.kind, datasets, values, config, args.workers))
    elif args.kind == "depth":
        rows = depth_sweep(*datasets, [int(v) for v in values], config)
    else:
        rows = lambda_sweep(*datasets, [float(v) for v in values], config)

    out = _out_dir(args)
    sweep_path = out / "sweep.csv"
    _write_frame(pd.DataFrame([dataclasses.asdict(r) for r in rows]), sweep_path)
    _finish(args, out, [sweep_path], _inputs(args, "train", "valid", "test", "schema"), config.seed)


async def _cross_validate_concurrently(
    dataset: SurvivalDataset, folds: int, config: TrainConfig, workers: int
) -> Any:
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return await async_trainer.cross_validate(dataset, folds, config, executor=pool)


def cmd_crossval(args: argparse.Namespace) -> None:
    _require(args, "data")
    config = _train_config(args)
    dataset = load_csv(args.data, _schema(args.schema))

    if args.workers > 1:
        result = asyncio.run(_cross_validate_concurrently(dataset, args.folds, config, args.workers))
    else:
        result = cross_validate(dataset, args.folds, config)

    rows: List[Dict[str, Any]] = [
        {
            "fold": str(i),
            "valid_cindex": report.best_cindex,
            "best_epoch": report.best_epoch,
            "sparsity": report.sparsity,
        }
        for i, report in enumerate(result.reports)
    ]
    rows.append({"fold": "mean", "valid_cindex": result.mean})
    rows.append({"fold": "std", "valid_cindex": result.std})

    out = _out_dir(args)
    crossval_path = out / "crossval.csv"
    frame = pd.DataFrame(rows, columns=["fold", "valid_cindex", "best_epoch", "sparsity"])
    _write_frame(frame, crossval_path)
    _finish(args, out, [crossval_path], _inputs(args, "data", "schema"), config.seed)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="INI file whose [nsotree] section sets flag defaults")
    common.add_argument(
        "-v", "--verbose", action=argparse.BooleanOptionalAction, default=False, help="log debug messages"
    )
    common.add_argument(
        "--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or {DEFAULT_OUTPUT_DIR})"
    )
    return common


def _training_options(standardize: bool = True) -> argparse.ArgumentParser:
    training = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    training.add_argument("--model", choices=("nsotree", "linear"))
    training.add_argument("--depth", type=int, help="split layers L (default 30)")
    training.add_argument("--dh", dest="hidden_dim", type=int, help="units per layer (default 1)")
    training.add_argument("--lr", dest="learning_rate", type=float, help="learning rate (default 0.1)")
    training.add_argument("--batch", dest="batch_size", type=int, help="batch size (default 1024)")
    training.add_argument("--lambda", dest="lam", type=float, help="soft threshold (default 1e-4)")
    training.add_argument("--epochs", dest="max_epochs", type=int, help="epoch budget (default 500)")
    training.add_argument("--patience", type=int, help="early-stopping patience (default 10)")
    training.add_argument("--seed", type=int, help="seed of initialization and shuffling (default 0)")
    training.add_argument("--optimizer", choices=("sgd", "adam"))
    training.add_argument("--activation", choices=("softplus", "relu"), help="training activation")
    training.add_argument("--schema", help="INI file mapping CSV columns to roles")
    if standardize:
        training.add_argument(
            "--standardize",
            action=argparse.BooleanOptionalAction,
            default=False,
            help="standardize covariates with the training set's statistics",
        )
    return training


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsotree",
        description="Train, evaluate and read neural survival oblique trees.",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {nsotree.__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    common, training = _common_options(), _training_options()

    sim = commands.add_parser(
        "simulate", parents=[common], allow_abbrev=False, help="write a simulated benchmark"
    )
    sim.add_argument("--risk", choices=("linear", "gaussian"))
    sim.add_argument("--n", type=int, help="total records, split 4:1:1 (default 6000)")
    sim.add_argument("--n-train", type=int)
    sim.add_argument("--n-valid", type=int)
    sim.add_argument("--n-test", type=int)
    sim.add_argument("--dim", type=int, help="covariate dimension (default 10)")
    sim.add_argument("--lambda-max", type=float, help="peak hazard ratio of the Gaussian risk")
    sim.add_argument("--scale", type=float, help="width of the Gaussian risk")
    sim.add_argument("--baseline-rate", type=float)
    sim.add_argument("--censor-frac", dest="censor_fraction", type=float)
    sim.add_argument("--seed", type=int)
    sim.set_defaults(handler=cmd_simulate)

    fit = commands.add_parser(
        "train", parents=[common, training], allow_abbrev=False, help="train a model"
    )
    fit.add_argument("--train", help="training CSV")
    fit.add_argument("--valid", help="early-stopping CSV")
    fit.set_defaults(handler=cmd_train)

    ev = commands.add_parser(
        "eval", parents=[common], allow_abbrev=False, help="evaluate a checkpoint"
    )
    ev.add_argument("--checkpoint")
    ev.add_argument("--test")
    ev.add_argument("--schema")
    ev.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples B (0 for none)")
    ev.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    ev.add_argument("--truth", help="simulation sidecar with the true risks")
    ev.add_argument("--truth-split", default="test")
    ev.add_argument("--grid-points", type=int, default=100)
    ev.add_argument(
        "--surface-points", type=int, default=41, help="grid size per axis of surface.csv"
    )
    ev.set_defaults(handler=cmd_eval)

    ex = commands.add_parser(
        "extract", parents=[common], allow_abbrev=False, help="export the oblique tree"
    )
    ex.add_argument("--checkpoint")
    ex.add_argument("--data", help="CSV to annotate every split with a log-rank test on")
    ex.add_argument("--schema")
    ex.add_argument("--layers", type=int, help="keep the first K layers")
    ex.add_argument("--format", choices=("json", "dot"), default="json")
    ex.add_argument(
        "--expand",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="draw the fully expanded binary tree",
    )
    ex.set_defaults(handler=cmd_extract)

    sw = commands.add_parser(
        "sweep", parents=[common, training], allow_abbrev=False, help="depth or lambda sweep"
    )
    sw.add_argument("--kind", choices=("depth", "lambda"), default="depth")
    sw.add_argument("--values", type=float, nargs="+")
    sw.add_argument("--start", type=float)
    sw.add_argument("--stop", type=float, help="inclusive")
    sw.add_argument("--step", type=float)
    sw.add_argument("--train")
    sw.add_argument("--valid")
    sw.add_argument("--test")
    sw.add_argument("--workers", type=int, default=1, help="parallel training runs")
    sw.set_defaults(handler=cmd_sweep)

    cv = commands.add_parser(
        "crossval",
        parents=[common, _training_options(standardize=False)],
        allow_abbrev=False,
        help="k-fold cross-validation",
        description="k-fold cross-validation. Every fold is standardized with the "
        "statistics of its training part, so there is no --standardize flag.",
    )
    cv.add_argument("--data")
    cv.add_argument("--folds", type=int, default=5)
    cv.add_argument("--workers", type=int, default=1, help="parallel training runs")
    cv.set_defaults(handler=cmd_crossval)

    return parser


def config_tokens(path: str) -> List[str]:
    """
    Command-line tokens equivalent to the `[nsotree]` section of an INI file.
    Keys are flag names with or without the leading dashes; underscores and
    dashes are interchangeable.
    """

    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as f:
        parser.read_file(f)
    if not parser.has_section(CONFIG_SECTION):
        raise UsageError(f"{path} has no [{CONFIG_SECTION}] section")

    tokens: List[str] = []
    for key in parser.options(CONFIG_SECTION):
        name = key.lstrip("-").replace("_", "-")
        if name == "config":
            continue
        if name.replace("-", "_") in _BOOLEAN_KEYS:
            flag = parser.getboolean(CONFIG_SECTION, key)
            tokens.append(f"--{name}" if flag else f"--no-{name}")
        elif name.replace("-", "_") in _LIST_KEYS:
            tokens.extend([f"--{name}", *parser.get(CONFIG_SECTION, key).split()])
        else:
            tokens.extend([f"--{name}", parser.get(CONFIG_SECTION, key)])
    return tokens


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command. Returns 0 on success and 1 when the command fails;
    usage errors exit with status 2.
    """

    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)

    ignored: List[str] = []
    if args.config is not None:
        try:
            tokens = config_tokens(args.config)
        except (OSError, configparser.Error, UsageError, ValueError) as e:
            parser.error(f"cannot use config file {args.config}: {e}")
        # the file's flags go first so that the command line overrides them
        args, ignored = parser.parse_known_args([argv[0], *tokens, *argv[1:]])

    configure_logging(bool(args.verbose))
    if ignored:
        logger.debug("Config entries %s do not apply to %s", " ".join(ignored), args.command)

    try:
        args.handler(args)
    except UsageError as e:
        parser.error(str(e))
    except (NSOTreeError, ValueError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        return 1

    return 0
