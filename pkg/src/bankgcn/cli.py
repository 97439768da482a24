"""Command-line front end: ``bankgcn <command> [options]``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys

import numpy as np

from bankgcn.checkpoint import atomic_write, load_checkpoint, save_checkpoint
from bankgcn.checks import format_table, run_checks
from bankgcn.config import load_run_config
from bankgcn.data import (
    ONEHOT_ATTRIBUTES,
    normalize_attributes,
    parse_tu_dataset,
    stratified_split,
    synthetic_spectral_dataset,
    write_tu_dataset,
)
from bankgcn.errors import BankGCNError, CheckpointError, ConfigError, DimensionError
from bankgcn.layer import CONVENTIONS, PAPER_TABLE, PER_SUBSPACE, bank_layer_param_count, diversity_penalty
from bankgcn.model import init_model, model_param_count
from bankgcn.spectral import frequency_response_grid
from bankgcn.training import best_epoch, evaluate, train

logger = logging.getLogger("bankgcn")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _thread_limit():
    cap = os.environ.get("BANKGCN_THREADS")
    if not cap:
        return contextlib.nullcontext()
    try:
        n = int(cap)
    except ValueError:
        raise ConfigError(f"BANKGCN_THREADS must be an integer, got {cap!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, n))


def _config(args, extra=()):
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "out", None) is not None:
        overrides.append(f"out={args.out}")
    return load_run_config(args.config, overrides + list(extra))


def load_dataset(cfg, max_degree=None):
    if cfg["dataset.kind"] == "synthetic":
        return synthetic_spectral_dataset(
            cfg["dataset.n_graphs"], cfg["dataset.nodes_per_graph"], cfg["dataset.seed"], cfg["dataset.channels"]
        )
    ds = parse_tu_dataset(cfg["dataset.dir"], cfg["dataset.name"], structural_max_degree=max_degree)
    norm = cfg["dataset.normalize"]
    if norm == "true" or (norm == "auto" and ds.feature_kind == ONEHOT_ATTRIBUTES):
        ds = normalize_attributes(ds)
    return ds


def _split_graphs(ds, seed):
    split = stratified_split(ds.labels, (0.8, 0.1, 0.1), seed)
    return split, {name: ds.subset(getattr(split, name)) for name in ("train", "val", "test")}


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_train(args):
    cfg = _config(args)
    ds = load_dataset(cfg)
    for r in range(cfg["runs"]):
        stratified_split(ds.labels, (0.8, 0.1, 0.1), cfg["seed"] + r)
    out = cfg["out"]
    accs, best_epochs = [], []
    for r in range(cfg["runs"]):
        seed = cfg["seed"] + r
        _, parts = _split_graphs(ds, seed)
        params = init_model(
            ds.feature_width,
            ds.num_classes,
            widths=cfg.widths,
            s=cfg["model.s"],
            K=cfg["model.K"],
            gamma=cfg["train.gamma"],
            seed=seed,
            frozen_lowpass=cfg["model.frozen_lowpass"],
        )
        best, history = train(params, (parts["train"], parts["val"]), cfg.train_config(r))
        acc, _ = evaluate(best, parts["test"])
        train_acc, _ = evaluate(best, parts["train"])
        run_dir = os.path.join(out, f"run{r}")
        atomic_write(os.path.join(run_dir, "history.ndjson"), "".join(json.dumps(rec) + "\n" for rec in history))
        extra = {"train_acc": train_acc, "test_acc": acc, "best_epoch": best_epoch(history), "seed": seed}
        if "max_degree" in ds.metadata:
            extra["max_degree"] = ds.metadata["max_degree"]
        save_checkpoint(os.path.join(run_dir, "checkpoint.bgcn"), best, extra)
        accs.append(acc)
        best_epochs.append(best_epoch(history))
        logger.info("run %d: test accuracy %.4f (best epoch %d)", r, acc, best_epochs[-1])
    summary = {
        "dataset": ds.name,
        "runs": cfg["runs"],
        "mean_acc": float(np.mean(accs)),
        "std_acc": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
        "per_run_acc": accs,
        "best_epoch": best_epochs,
        "param_count": {c: model_param_count(best, c) for c in CONVENTIONS},
    }
    atomic_write(os.path.join(out, "summary.json"), _json(summary))
    print(_json(summary), end="")
    return EXIT_OK


def cmd_eval(args):
    cfg = _config(args)
    params, extra = load_checkpoint(args.checkpoint)
    max_degree = int(extra["max_degree"]) if "max_degree" in extra else None
    ds = load_dataset(cfg, max_degree=max_degree)
    if params.layers and ds.feature_width != params.d_in:
        raise DimensionError(f"dataset feature width {ds.feature_width} does not match checkpoint input width {params.d_in}")
    if ds.num_classes != params.num_classes:
        raise DimensionError(f"dataset has {ds.num_classes} classes, checkpoint predicts {params.num_classes}")
    split = cfg["eval.split"]
    if split == "all":
        graphs = ds.graphs
    else:
        seed = int(extra["seed"]) if "seed" in extra else cfg["seed"]
        graphs = _split_graphs(ds, seed)[1][split]
    acc, confusion = evaluate(params, graphs)
    print(_json({"split": split, "num_graphs": len(graphs), "accuracy": acc, "confusion": confusion.tolist()}), end="")
    return EXIT_OK


def cmd_export_response(args):
    extra = []
    if args.layer is not None:
        extra.append(f"export.layer={args.layer}")
    if args.points is not None:
        extra.append(f"export.points={args.points}")
    cfg = _config(args, extra)
    params, _ = load_checkpoint(args.checkpoint)
    layer_idx, points = cfg["export.layer"], cfg["export.points"]
    if not 0 <= layer_idx < len(params.layers):
        raise ConfigError(f"layer index {layer_idx} out of range for a {len(params.layers)}-layer model")
    layer = params.layers[layer_idx]
    out = cfg["out"]
    grids = [frequency_response_grid(f, points) for f in layer.filters]
    for p, grid in enumerate(grids):
        body = "lambda,response\n" + "".join(f"{lam:.17g},{val:.17g}\n" for lam, val in grid)
        atomic_write(os.path.join(out, f"layer{layer_idx}_filter{p}.csv"), body)
    header = "lambda," + ",".join(f"filter{p}" for p in range(len(grids))) + "\n"
    rows = []
    for k in range(points):
        rows.append(",".join([f"{grids[0][k][0]:.17g}"] + [f"{g[k][1]:.17g}" for g in grids]) + "\n")
    atomic_write(os.path.join(out, f"layer{layer_idx}_filters.csv"), header + "".join(rows))
    print(_json({"layer": layer_idx, "filters": len(grids), "points": points, "omega": diversity_penalty(layer.alpha)}), end="")
    return EXIT_OK


def cmd_check(args):
    results = run_checks(seed=args.seed or 0, fault=1e-2 if args.inject_fault else None)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_gen_synthetic(args):
    cfg = _config(args, ["dataset.kind=synthetic"])
    ds = load_dataset(cfg)
    prefix = write_tu_dataset(ds, cfg["out"], args.name)
    print(_json({"written": prefix, **ds.statistics()}), end="")
    return EXIT_OK


def cmd_inspect_dataset(args):
    cfg = _config(args)
    ds = load_dataset(cfg)
    stats = ds.statistics()
    params = init_model(
        ds.feature_width,
        ds.num_classes,
        widths=cfg.widths,
        s=cfg["model.s"],
        K=cfg["model.K"],
        seed=cfg["seed"],
        frozen_lowpass=cfg["model.frozen_lowpass"],
    )
    per_layer = []
    for layer in params.layers:
        per_layer.append(
            {
                "d_in": layer.d_in,
                "d_out": layer.d_out,
                "s": layer.s,
                "K": layer.K,
                PER_SUBSPACE: bank_layer_param_count(layer, PER_SUBSPACE, params.frozen_filters),
                PAPER_TABLE: bank_layer_param_count(layer, PAPER_TABLE, params.frozen_filters),
            }
        )
    stats["parameters"] = {
        "per_layer": per_layer,
        "total": {c: model_param_count(params, c) for c in CONVENTIONS},
        "note": (
            "paper-table counts K+1 filter coefficients per layer (4160 + K + 1 for 64->64); "
            "per-subspace counts s*(K+1), one coefficient vector per subspace filter, which is what is trained"
        ),
    }
    print(_json(stats), end="")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="bankgcn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, out=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int)
        if out:
            p.add_argument("--out", help="output directory")
        return p

    common(sub.add_parser("train", help="train and evaluate over repeated runs")).set_defaults(func=cmd_train)
    p = common(sub.add_parser("eval", help="evaluate a checkpoint"), out=False)
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_eval)
    p = common(sub.add_parser("export-response", help="write learned filter responses as CSV"))
    p.add_argument("checkpoint")
    p.add_argument("--layer", type=int)
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_export_response)
    p = sub.add_parser("check", help="run the randomized property suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true", help="perturb one analytic gradient by 1e-2")
    p.set_defaults(func=cmd_check)
    p = common(sub.add_parser("gen-synthetic", help="write the synthetic benchmark in TU format"))
    p.add_argument("--name", default="SYNTHETIC")
    p.set_defaults(func=cmd_gen_synthetic)
    common(sub.add_parser("inspect-dataset", help="dataset statistics and parameter accounting"), out=False).set_defaults(
        func=cmd_inspect_dataset
    )
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with _thread_limit():
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (BankGCNError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
