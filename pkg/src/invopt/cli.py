"""Command-line interface: generate / train / eval / project.

Exit codes: 0 on success, 2 on usage errors (argparse's convention), 3 when
a solver fails on the given data. Outputs are written atomically (temp file
plus rename) so a crashed run never leaves a half-written artifact.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    gen_knapsack,
    gen_perfect_matching,
    gen_portfolio,
    gen_shortest_path,
    load_dataset,
    load_model,
    dataset_to_json,
    save_model,
)
from .errors import NumericalFailure
from .feasibility import make_projector
from .lp import LpInstance
from .metrics import evaluate
from .training import TrainConfig, run_trainer

_TRAIN_DEFAULTS = {
    "method": "pocs",
    "step": "constant",
    "step_size": 1.0,
    "epochs": 50,
    "margin": 1.0,
    "seed": 0,
    "shuffle": True,
}


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _parse_vector(text: str, name: str, parser) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip() != ""])
    except ValueError:
        parser.error(f"{name}: expected comma-separated numbers, got {text!r}")


def _parse_matrix(text: str, name: str, parser) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip() != ""]
    return np.array([_parse_vector(r, name, parser) for r in rows])


def cmd_generate(args, parser) -> int:
    total = args.n + args.n_val + args.n_test
    if args.problem == "sp-grid":
        pool = gen_shortest_path(
            total, args.seed, grid_size=args.grid_size, d=args.d,
            degree=args.degree, noise=args.noise,
        )
    elif args.problem == "knapsack":
        pool = gen_knapsack(
            total, args.seed, items=args.items, d=args.d,
            degree=args.degree, noise=args.noise,
        )
    elif args.problem == "perfect-matching":
        pool = gen_perfect_matching(
            total, args.seed, grid_size=args.grid_size, d=args.d,
            degree=args.degree, noise=args.noise,
        )
    else:  # portfolio
        pool = gen_portfolio(
            total, args.seed, m=args.stocks, d=args.d,
            gamma=args.gamma, noise=args.noise,
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = ("train", "val", "test")
    for name, part in zip(names, pool.split((args.n, args.n_val, args.n_test))):
        _atomic_write(
            out / f"{name}.json", json.dumps(dataset_to_json(part), indent=2) + "\n"
        )
        print(f"wrote {out / (name + '.json')} ({len(part)} samples)")
    return 0


def _load_split(path, parser, flag: str) -> Dataset:
    try:
        return load_dataset(path)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        parser.error(f"{flag}: {exc}")


def _resolve_train_config(args, parser) -> dict:
    merged = dict(_TRAIN_DEFAULTS)
    if args.config is not None:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"--config: {exc}")
        unknown = set(file_cfg) - set(_TRAIN_DEFAULTS)
        if unknown:
            parser.error(f"--config: unknown keys {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _TRAIN_DEFAULTS:
        flag_value = getattr(args, key)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def cmd_train(args, parser) -> int:
    if args.data is not None:
        base = Path(args.data)
        train_path = base / "train.json"
        val_path = base / "val.json" if (base / "val.json").exists() else None
        test_path = base / "test.json" if (base / "test.json").exists() else None
    else:
        if args.train is None:
            parser.error("either --data or --train is required")
        train_path, val_path, test_path = args.train, args.val, args.test
    train_ds = _load_split(train_path, parser, "--train")
    eval_splits = {}
    if val_path is not None:
        eval_splits["val"] = _load_split(val_path, parser, "--val")
    if test_path is not None:
        eval_splits["test"] = _load_split(test_path, parser, "--test")

    resolved = _resolve_train_config(args, parser)
    cfg = TrainConfig(
        method=resolved["method"],
        step=resolved["step"],
        step_size=resolved["step_size"],
        epochs=resolved["epochs"],
        margin=resolved["margin"],
        seed=resolved["seed"],
        shuffle=resolved["shuffle"],
    )
    try:
        started = time.perf_counter()
        result = run_trainer(train_ds, cfg, eval_splits=eval_splits or None)
        wall_ms = (time.perf_counter() - started) * 1000.0
    except ValueError as exc:
        parser.error(str(exc))
    except NumericalFailure as exc:
        where = "" if exc.sample_index is None else f" (sample {exc.sample_index})"
        print(f"error: {exc}{where}", file=sys.stderr)
        return 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.theta, train_ds.feature_scale, out / "model.json")

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(
        ["epoch", "split", "h", "estimate_loss", "decision_loss", "subopt_mean", "wall_ms"]
    )
    for record in result.log:
        writer.writerow([
            record.epoch,
            record.split,
            repr(record.h),
            "" if record.estimate_loss is None else repr(record.estimate_loss),
            "" if record.decision_loss is None else repr(record.decision_loss),
            "" if record.subopt_mean is None else repr(record.subopt_mean),
            f"{record.wall_ms:.3f}",
        ])
    _atomic_write(out / "metrics.csv", buffer.getvalue())

    final = {}
    for record in result.log:
        final[record.split] = {
            "epoch": record.epoch,
            "h": record.h,
            "estimate_loss": record.estimate_loss,
            "decision_loss": record.decision_loss,
            "subopt_mean": _json_safe(record.subopt_mean),
        }
    report = {
        "config": {**resolved, "train": str(train_path),
                   "val": str(val_path) if val_path else None,
                   "test": str(test_path) if test_path else None,
                   "out": str(out), "schema": 1},
        "final": final,
        "wall_ms_total": wall_ms,
    }
    _atomic_write(out / "report.json", json.dumps(report, indent=2) + "\n")
    for name in ("model.json", "metrics.csv", "report.json"):
        print(f"wrote {out / name}")
    return 0


def cmd_eval(args, parser) -> int:
    dataset = _load_split(args.data, parser, "--data")
    try:
        theta, _ = load_model(args.model)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        parser.error(f"--model: {exc}")
    if theta.shape[0] != dataset.features().shape[1]:
        parser.error(
            f"--model: theta expects {theta.shape[0]} features, dataset has "
            f"{dataset.features().shape[1]}"
        )
    try:
        record = evaluate(dataset, theta, args.margin, split=args.split)
    except NumericalFailure as exc:
        where = "" if exc.sample_index is None else f" (sample {exc.sample_index})"
        print(f"error: {exc}{where}", file=sys.stderr)
        return 3
    print(json.dumps({
        "split": record.split,
        "h": record.h,
        "estimate_loss": record.estimate_loss,
        "decision_loss": record.decision_loss,
        "subopt_mean": _json_safe(record.subopt_mean),
        "mu": record.mu,
    }, indent=2))
    return 0


def cmd_project(args, parser) -> int:
    if args.data is not None:
        dataset = _load_split(args.data, parser, "--data")
        if not 0 <= args.index < len(dataset):
            parser.error(f"--index: out of range for {len(dataset)} samples")
        problem = dataset.problem
        x_star = dataset.samples[args.index].x_star
    else:
        if args.a is None or args.b is None or args.x_star is None:
            parser.error("either --data/--index or --a/--b/--x-star is required")
        a = _parse_matrix(args.a, "--a", parser)
        b = _parse_vector(args.b, "--b", parser)
        x_star = _parse_vector(args.x_star, "--x-star", parser)
        try:
            problem = LpInstance(a=a, b=b)
        except ValueError as exc:
            parser.error(str(exc))
    query = _parse_vector(args.q, "--q", parser)
    try:
        projector = make_projector(problem, x_star, args.margin)
        projection = projector.project(query)
    except ValueError as exc:
        parser.error(str(exc))
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({
        "point": projection.point.tolist(),
        "distance_sq": projection.distance_sq,
        "lambda": projection.lam.tolist(),
        "nu": projection.nu.tolist(),
    }, indent=2))
    return 0


def _add_generate(sub) -> None:
    p = sub.add_parser("generate", help="write synthetic train/val/test datasets")
    p.add_argument("--problem", required=True,
                   choices=["sp-grid", "knapsack", "portfolio", "perfect-matching"])
    p.add_argument("--n", type=int, default=100, help="training samples")
    p.add_argument("--n-val", type=int, default=None, help="default: --n")
    p.add_argument("--n-test", type=int, default=None, help="default: --n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid-size", type=int, default=None,
                   help="sp-grid default 5, perfect-matching default 4")
    p.add_argument("--items", type=int, default=10)
    p.add_argument("--stocks", type=int, default=10)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--d", type=int, default=None,
                   help="context dimension incl. intercept (sp-grid 6, others 5)")
    p.add_argument("--degree", type=int, default=None,
                   help="cost polynomial degree (sp-grid 4, others 2)")
    p.add_argument("--noise", type=float, default=0.25)
    p.set_defaults(func=cmd_generate, post=_finish_generate)


def _finish_generate(args, parser) -> None:
    if args.n_val is None:
        args.n_val = args.n
    if args.n_test is None:
        args.n_test = args.n
    if args.grid_size is None:
        args.grid_size = 4 if args.problem == "perfect-matching" else 5
    if args.d is None:
        args.d = 6 if args.problem == "sp-grid" else 5
    if args.degree is None:
        args.degree = 4 if args.problem == "sp-grid" else 2
    if min(args.n, args.n_val, args.n_test) < 1:
        parser.error("--n/--n-val/--n-test must be positive")


def _add_train(sub) -> None:
    p = sub.add_parser("train", help="fit a cost model and log per-epoch metrics")
    p.add_argument("--data", default=None,
                   help="directory with train.json (and optionally val/test.json)")
    p.add_argument("--train", default=None, help="training dataset file")
    p.add_argument("--val", default=None)
    p.add_argument("--test", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None,
                   help="JSON file of defaults; explicit flags win")
    p.add_argument("--method", choices=["pocs", "gd", "sgd", "precond-gd"],
                   default=None)
    p.add_argument("--step", choices=["constant", "armijo", "inverse-t"],
                   default=None)
    p.add_argument("--step-size", dest="step_size", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--margin", type=float, default=None,
                   help="reduced-cost margin (use 0 for allocation problems)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-shuffle", dest="shuffle", action="store_false",
                   default=None)
    p.set_defaults(func=cmd_train, post=None)


def _add_eval(sub) -> None:
    p = sub.add_parser("eval", help="metrics of a saved model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--split", default="eval", help="split label in the output")
    p.set_defaults(func=cmd_eval, post=None)


def _add_project(sub) -> None:
    p = sub.add_parser("project",
                       help="project a cost vector onto one decision's feasible set")
    p.add_argument("--q", required=True, help="query cost, comma-separated")
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--data", default=None, help="take the instance from a dataset")
    p.add_argument("--index", type=int, default=0, help="sample index in --data")
    p.add_argument("--a", default=None, help="rows 'a11,a12;a21,a22'")
    p.add_argument("--b", default=None, help="comma-separated right-hand side")
    p.add_argument("--x-star", dest="x_star", default=None,
                   help="observed decision, comma-separated")
    p.set_defaults(func=cmd_project, post=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="invopt",
        description="learn contextual cost models from observed decisions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_train(sub)
    _add_eval(sub)
    _add_project(sub)
    args = parser.parse_args(argv)
    if args.post is not None:
        args.post(args, parser)
    try:
        return args.func(args, parser)
    except NumericalFailure as exc:
        where = "" if exc.sample_index is None else f" (sample {exc.sample_index})"
        print(f"error: {exc}{where}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
