"""Command-line interface binding all modules.

Subcommands: synth, imprint, predict, nc1, oracle, grid, cd-diagram.
Usage errors exit with code 2, runtime errors with code 1; both are reported
on stderr as single-line JSON. Defaults follow the strongest configuration
found in evaluations: k-means generation with k=20, L2 at every
normalization slot, and max aggregation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .collapse import compute_nc1, imbalanced_nc1, rank_of_sigma_b
from .dataset import (
    EMBEDDING_FORMAT_VERSION,
    SyntheticTaskSpec,
    generate_synthetic,
    load_embeddings,
    save_embeddings,
)
from .generate import GenStrategy
from .head import (
    HEAD_FORMAT_VERSION,
    AggMode,
    ImprintConfig,
    imprint,
    load_head,
    predict_batch,
    save_head,
)
from .oracle import k_least_squares, least_squares_weights
from .runner import load_grid_spec, read_results_csv, results_matrix, run_grid, write_results_csv
from .stats import build_cd_diagram, diagram_summary, emit_cd_svg

_GEN_CHOICES = ("all", "mean", "k-means", "k-medoids", "k-cov-max", "k-fps", "k-random")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as single-line JSON."""

    def error(self, message):
        print(json.dumps({"error": message}), file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imprint", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"imprint {__version__} "
            f"(embedding-format v{EMBEDDING_FORMAT_VERSION}, head-format v{HEAD_FORMAT_VERSION})"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic embedding file")
    synth.add_argument("--classes", type=int, required=True)
    synth.add_argument("--modes", type=int, default=1, help="modes per class")
    synth.add_argument("--per-mode", type=int, required=True, dest="per_mode")
    synth.add_argument("--dim", type=int, required=True)
    synth.add_argument("--sep", type=float, default=6.0, help="mode center radius")
    synth.add_argument("--std", type=float, default=1.0, help="within-mode std")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)

    imp = sub.add_parser("imprint", help="build a classifier head from embeddings")
    imp.add_argument("--train", required=True)
    imp.add_argument("--gen", choices=_GEN_CHOICES, default="k-means")
    imp.add_argument("--k", type=int, default=20)
    imp.add_argument("--norm-pre", choices=("none", "l2"), default="l2")
    imp.add_argument("--norm-post", choices=("none", "l2", "quantile"), default="l2")
    imp.add_argument("--norm-inf", choices=("none", "l2"), default="l2")
    imp.add_argument("--seed", type=int, default=0)
    imp.add_argument("--out", required=True)
    imp.set_defaults(func=_cmd_imprint)

    pred = sub.add_parser("predict", help="score a head on a labeled test file")
    pred.add_argument("--head", required=True)
    pred.add_argument("--test", required=True)
    pred.add_argument("--agg", choices=("max", "m-nn"), default="max")
    pred.add_argument("--m", type=int, default=1)
    pred.add_argument(
        "--report", choices=("accuracy", "per-class", "json"), default="accuracy"
    )
    pred.set_defaults(func=_cmd_predict)

    nc1 = sub.add_parser("nc1", help="variability-collapse score of a dataset")
    nc1.add_argument("--data", required=True)
    nc1.add_argument(
        "--no-l2",
        action="store_true",
        help="skip the default L2 normalization before the statistics",
    )
    nc1.set_defaults(func=_cmd_nc1)

    orc = sub.add_parser("oracle", help="closed-form least-squares reference head")
    orc.add_argument("--train", required=True)
    orc.add_argument("--k", type=int, default=1)
    orc.add_argument("--lambda", type=float, default=1e-4, dest="ridge_lambda")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", required=True)
    orc.set_defaults(func=_cmd_oracle)

    grid = sub.add_parser("grid", help="run a configuration grid from a JSON spec")
    grid.add_argument("--spec", required=True)
    grid.add_argument("--out", required=True)
    grid.add_argument("--workers", type=int, default=1)
    grid.set_defaults(func=_cmd_grid)

    cd = sub.add_parser("cd-diagram", help="critical-difference diagram from results")
    cd.add_argument("--results", required=True)
    cd.add_argument("--alpha", type=float, default=0.05)
    cd.add_argument("--out", required=True)
    cd.set_defaults(func=_cmd_cd_diagram)
    return parser


def _cmd_synth(args) -> int:
    spec = SyntheticTaskSpec(
        class_count=args.classes,
        modes_per_class=args.modes,
        samples_per_mode=args.per_mode,
        dim=args.dim,
        mode_separation=args.sep,
        within_mode_std=args.std,
        seed=args.seed,
    )
    dataset = generate_synthetic(spec)
    save_embeddings(dataset, args.out)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "rows": dataset.n_total,
                "classes": dataset.class_count,
                "dim": dataset.dim,
            }
        )
    )
    return 0


def _config_from_args(args) -> ImprintConfig:
    return ImprintConfig(
        gen=GenStrategy(args.gen.replace("-", "_"), k=args.k, seed=args.seed),
        norm_pre=args.norm_pre,
        norm_post=args.norm_post,
        norm_inf=args.norm_inf,
        agg=AggMode("max"),
        seed=args.seed,
    )


def _cmd_imprint(args) -> int:
    train = load_embeddings(args.train)
    config = _config_from_args(args)
    head = imprint(train, config)
    save_head(head, args.out, config=config)
    print(
        json.dumps(
            {"out": str(args.out), "proxies": head.proxy_count, "classes": head.class_count}
        )
    )
    return 0


def _cmd_predict(args) -> int:
    head, _meta = load_head(args.head)
    test = load_embeddings(args.test)
    agg = AggMode(args.agg.replace("-", "_"), m=args.m)
    predictions = predict_batch(head, test.vectors, agg)
    correct = predictions == test.labels
    accuracy = float(np.mean(correct))
    if args.report == "accuracy":
        print(repr(accuracy))
        return 0
    per_class = {}
    for c in range(test.class_count):
        mask = test.labels == c
        per_class[str(c)] = {
            "accuracy": float(np.mean(correct[mask])),
            "count": int(mask.sum()),
        }
    if args.report == "per-class":
        for c, entry in per_class.items():
            print(f"class {c}: {entry['accuracy']:.4f} ({entry['count']} samples)")
        return 0
    print(
        json.dumps(
            {"accuracy": accuracy, "n": test.n_total, "per_class": per_class},
            sort_keys=True,
        )
    )
    return 0


def _cmd_nc1(args) -> int:
    dataset = load_embeddings(args.data)
    counts = dataset.per_class_counts()
    balanced = bool(np.unique(counts).size == 1)
    pre_l2 = not args.no_l2
    stats = (
        compute_nc1(dataset, pre_l2=pre_l2)
        if balanced
        else imbalanced_nc1(dataset, pre_l2=pre_l2)
    )
    print(
        json.dumps(
            {
                "nc1": stats.nc1,
                "C": dataset.class_count,
                "l": dataset.dim,
                "per_class_counts": counts.tolist(),
                "trace_sigma_w": float(np.trace(stats.sigma_w)),
                "rank_sigma_b": rank_of_sigma_b(stats, dataset.class_count),
                "balanced": balanced,
                "pre_l2": pre_l2,
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_oracle(args) -> int:
    train = load_embeddings(args.train)
    if args.k == 1:
        weights = least_squares_weights(train, args.ridge_lambda)
    else:
        weights = k_least_squares(train, args.k, args.ridge_lambda, args.seed)
    save_head(
        weights.as_head(), args.out, oracle=True, ridge_lambda=weights.ridge_lambda
    )
    print(
        json.dumps(
            {
                "out": str(args.out),
                "rows": int(weights.weights.shape[0]),
                "k": weights.k,
                "lambda": weights.ridge_lambda,
            }
        )
    )
    return 0


def _cmd_grid(args) -> int:
    spec = load_grid_spec(args.spec)
    rows = run_grid(spec, workers=args.workers)
    write_results_csv(rows, args.out)
    errors = sum(1 for r in rows if r["error"])
    print(json.dumps({"out": str(args.out), "rows": len(rows), "error_rows": errors}))
    return 0


def _cmd_cd_diagram(args) -> int:
    rows = read_results_csv(args.results)
    configs, instances, matrix = results_matrix(rows)
    diagram = build_cd_diagram(
        matrix, alpha=args.alpha, config_names=tuple(configs), instance_names=tuple(instances)
    )
    emit_cd_svg(diagram, args.out)
    sidecar = Path(args.out).with_suffix(".json")
    sidecar.write_text(
        json.dumps(diagram_summary(diagram), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(json.dumps({"svg": str(args.out), "summary": str(sidecar)}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
