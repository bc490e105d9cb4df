"""Command line interface: train, analyze, sweep, gen.

Datasets are bundle directories, ``sbm:<preset>`` synthetic graphs, or bare
names resolved under $DISAMGNN_DATA. All outputs are plain CSV/JSON and are
reproducible byte for byte for a fixed flag set. Exit codes: 0 on success,
2 for configuration errors (argparse), 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

import numpy as np

from . import data as dataio
from .graph import Graph, SplitMasks
from .ambiguity import DisamConfig
from .models import BACKBONES, forward
from .regions import group_report, strategy1_groups, strategy2_groups
from .train import TrainConfig, TrainingDiverged, evaluate, train

__all__ = ["main", "build_parser"]

_SPLIT_STREAM = 104729  # distinct rng stream tag for split sampling


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from exc
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _hyper_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model and training")
    g.add_argument("--backbone", choices=list(BACKBONES), default="gcn")
    g.add_argument("--hidden", dest="hidden_dim", type=int, default=64)
    g.add_argument("--layers", dest="num_layers", type=int, default=2)
    g.add_argument("--sgc-k", dest="sgc_k", type=int, default=None)
    g.add_argument("--dropout", type=float, default=0.0)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--weight-decay", dest="weight_decay", type=float, default=5e-4)
    g.add_argument("--epochs", dest="max_epochs", type=int, default=8000)
    g.add_argument("--patience", type=int, default=200)
    d = p.add_argument_group("ambiguity and contrast")
    d.add_argument("--lambda", dest="loss_weight", type=float, default=1.0)
    d.add_argument("--mu", dest="memory_decay", type=float, default=0.5)
    d.add_argument("--threshold", dest="score_threshold", type=float, default=0.8)
    d.add_argument("--eps1", dest="pos_ratio", type=float, default=0.75)
    d.add_argument("--eps2", dest="neg_ratio", type=float, default=0.4)
    d.add_argument("--tau", dest="aux_similarity_min", type=float, default=0.7)
    d.add_argument("--k-aux", dest="aux_samples", type=int, default=8)
    d.add_argument("--refresh", dest="refresh_period", type=int, default=10)
    d.add_argument("--warmup", dest="warmup_epochs", type=int, default=50)
    return p


def _config_from_args(args, seed: int) -> TrainConfig:
    disam = DisamConfig(
        memory_decay=args.memory_decay,
        score_threshold=args.score_threshold,
        pos_ratio=args.pos_ratio,
        neg_ratio=args.neg_ratio,
        aux_similarity_min=args.aux_similarity_min,
        aux_samples=args.aux_samples,
        loss_weight=args.loss_weight,
        refresh_period=args.refresh_period,
        warmup_epochs=args.warmup_epochs,
    )
    return TrainConfig(
        backbone=args.backbone,
        hidden_dim=args.hidden_dim,
        num_layers=args.num_layers,
        sgc_k=args.sgc_k,
        dropout=args.dropout,
        lr=args.lr,
        weight_decay=args.weight_decay,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=seed,
        disam=disam,
    )


def resolve_dataset(name: str) -> tuple[Graph, SplitMasks | None]:
    """Load ``name`` as a preset (sbm:x), a directory, or $DISAMGNN_DATA/name."""
    if name.startswith("sbm:"):
        return dataio.sbm_generate(dataio.get_preset(name[4:])), None
    if os.path.isdir(name):
        return dataio.load_bundle(name)
    root = os.environ.get("DISAMGNN_DATA")
    if root and os.path.isdir(os.path.join(root, name)):
        return dataio.load_bundle(os.path.join(root, name))
    raise FileNotFoundError(
        f"dataset {name!r} is not a directory, a known sbm: preset, "
        f"or a name under $DISAMGNN_DATA"
    )


def _split_for_seed(g: Graph, masks: SplitMasks | None, seed: int) -> SplitMasks:
    if masks is not None:
        return masks
    rng = np.random.default_rng([_SPLIT_STREAM, seed])
    return dataio.make_split(g, rng=rng)


def _aggregate(per_seed: list[dict]) -> dict:
    out: dict = {}
    for split in ("train", "val", "test"):
        out[split] = {}
        for key in ("acc", "macro_f1", "macro_auroc"):
            vals = np.array([m[split][key] for m in per_seed])
            out[split][key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def _run_one_seed(args, g: Graph, bundle_masks: SplitMasks | None, seed: int):
    cfg = _config_from_args(args, seed)
    masks = _split_for_seed(g, bundle_masks, seed)
    params, state, history = train(cfg, g, masks)
    reports = {
        which: evaluate(params, g, masks, which).to_dict()
        for which in ("train", "val", "test")
    }
    return params, state, history, reports


def cmd_train(args) -> int:
    g, bundle_masks = resolve_dataset(args.dataset)
    os.makedirs(args.out, exist_ok=True)
    per_seed = []
    for seed in args.seeds:
        params, state, history, reports = _run_one_seed(args, g, bundle_masks, seed)
        seed_dir = os.path.join(args.out, f"seed_{seed}")
        os.makedirs(seed_dir, exist_ok=True)
        dataio.write_history_csv(history, os.path.join(seed_dir, "history.csv"))
        dataio.write_ambiguity_csv(state, os.path.join(seed_dir, "ambiguity.csv"))
        dataio.save_checkpoint(params, os.path.join(seed_dir, "checkpoint"))
        per_seed.append(reports)
        print(
            f"seed {seed}: best val acc {history.best_val_acc:.4f} "
            f"(epoch {history.best_epoch}), test acc {reports['test']['acc']:.4f}"
        )
    summary = {
        "dataset": args.dataset,
        "backbone": args.backbone,
        "seeds": args.seeds,
        "splits": _aggregate(per_seed),
    }
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {os.path.join(args.out, 'metrics.json')}")
    return 0


def cmd_gen(args) -> int:
    spec = dataio.get_preset(args.preset)
    g = dataio.sbm_generate(spec)
    dataio.save_bundle(g, args.out, name=f"sbm-{args.preset}")
    print(
        f"wrote bundle {args.out}: {g.num_nodes} nodes, {g.num_edges} edges, "
        f"{g.num_classes} classes"
    )
    return 0


def cmd_analyze(args) -> int:
    g, bundle_masks = resolve_dataset(args.dataset)
    params = dataio.load_checkpoint(args.checkpoint)
    scores, _flags = dataio.read_ambiguity_csv(args.ambiguity)
    if scores.shape[0] != g.num_nodes:
        raise ValueError(
            f"ambiguity file covers {scores.shape[0]} nodes, graph has {g.num_nodes}"
        )
    masks = _split_for_seed(g, bundle_masks, args.split_seed)
    mask = masks.mask(args.split)
    preds = forward(params, g).class_probs.argmax(axis=1)

    os.makedirs(args.out, exist_ok=True)
    by_strategy = {}
    for tag, groups in (("strategy1", strategy1_groups(g)), ("strategy2", strategy2_groups(g))):
        rows = group_report(groups, preds, g.labels, scores, mask)
        dataio.write_group_report_csv(rows, os.path.join(args.out, f"{tag}_report.csv"))
        by_strategy[tag] = rows
    amb_path = os.path.join(args.out, "ambiguity_by_group.csv")
    with open(amb_path, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["strategy", "group", "count", "mean_ambiguity"])
        for tag, rows in by_strategy.items():
            for r in rows:
                amb = "" if r["mean_ambiguity"] != r["mean_ambiguity"] else repr(r["mean_ambiguity"])
                writer.writerow([tag, r["group"], r["count"], amb])
    print(f"wrote group reports under {args.out}")
    return 0


_SWEEPABLE = {
    "lambda": ("loss_weight", float),
    "threshold": ("score_threshold", float),
    "mu": ("memory_decay", float),
    "eps1": ("pos_ratio", float),
    "eps2": ("neg_ratio", float),
    "tau": ("aux_similarity_min", float),
    "k-aux": ("aux_samples", int),
    "refresh": ("refresh_period", int),
    "warmup": ("warmup_epochs", int),
    "lr": ("lr", float),
    "weight-decay": ("weight_decay", float),
    "hidden": ("hidden_dim", int),
    "layers": ("num_layers", int),
    "dropout": ("dropout", float),
}


def _sweep_job(payload: dict) -> dict:
    """Worker for one (value, seed) sweep cell; must stay picklable."""
    ns = argparse.Namespace(**payload["args"])
    setattr(ns, payload["attr"], payload["value"])
    g, bundle_masks = resolve_dataset(ns.dataset)
    _params, _state, history, reports = _run_one_seed(ns, g, bundle_masks, payload["seed"])
    return {
        "value": payload["value"],
        "seed": payload["seed"],
        "best_val_acc": history.best_val_acc,
        "test": reports["test"],
    }


def cmd_sweep(args) -> int:
    if args.param not in _SWEEPABLE:
        raise ValueError(
            f"cannot sweep {args.param!r}; choose from {sorted(_SWEEPABLE)}"
        )
    attr, cast = _SWEEPABLE[args.param]
    try:
        values = [cast(tok) for tok in args.values.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"bad --values list {args.values!r}") from exc
    if not values:
        raise ValueError("--values list is empty")

    base = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "param", "values", "jobs", "out")
    }
    jobs = [
        {"args": base, "attr": attr, "value": value, "seed": seed}
        for value in values
        for seed in args.seeds
    ]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(job) for job in jobs]

    by_value: dict = {}
    for res in results:
        by_value.setdefault(res["value"], []).append(res)
    import csv as _csv

    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(
            [
                "param", "value", "num_seeds",
                "test_acc_mean", "test_acc_std",
                "test_macro_f1_mean", "test_macro_f1_std",
                "test_macro_auroc_mean", "test_macro_auroc_std",
            ]
        )
        for value in values:
            cells = by_value[value]
            row = [args.param, value, len(cells)]
            for key in ("acc", "macro_f1", "macro_auroc"):
                vals = np.array([c["test"][key] for c in cells])
                row.extend([repr(float(vals.mean())), repr(float(vals.std()))])
            writer.writerow(row)
    print(f"wrote {args.out} ({len(values)} values x {len(args.seeds)} seeds)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disamgnn",
        description="Ambiguity-aware GNN training and graph-region analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    hyper = _hyper_parser()

    p_train = sub.add_parser("train", parents=[hyper], help="train one model per seed")
    p_train.add_argument("--dataset", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seeds", type=_parse_seeds, default=[0])
    p_train.set_defaults(func=cmd_train)

    p_gen = sub.add_parser("gen", help="materialize a synthetic dataset bundle")
    p_gen.add_argument("--preset", choices=list(dataio.PRESET_NAMES), required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_gen)

    p_an = sub.add_parser("analyze", help="per-group reports for a trained model")
    p_an.add_argument("--dataset", required=True)
    p_an.add_argument("--checkpoint", required=True, help="checkpoint base path (no extension)")
    p_an.add_argument("--ambiguity", required=True, help="ambiguity.csv from train")
    p_an.add_argument("--out", required=True)
    p_an.add_argument("--split", choices=["train", "val", "test"], default="test")
    p_an.add_argument("--split-seed", type=int, default=0,
                      help="seed for the split when the bundle ships none")
    p_an.set_defaults(func=cmd_analyze)

    p_sw = sub.add_parser("sweep", parents=[hyper], help="grid over one hyperparameter")
    p_sw.add_argument("--dataset", required=True)
    p_sw.add_argument("--param", required=True)
    p_sw.add_argument("--values", required=True, help="comma-separated values")
    p_sw.add_argument("--out", required=True, help="sweep.csv path")
    p_sw.add_argument("--seeds", type=_parse_seeds, default=[0])
    p_sw.add_argument("--jobs", type=int, default=1)
    p_sw.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TrainingDiverged, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
