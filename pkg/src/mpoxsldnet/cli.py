"""Batch command-line front end.

Subcommands: train, evaluate, predict, summary, augment-preview,
dataset-stats.  Every failure path exits nonzero after printing one
machine-parsable line of the form ``error: <detail>`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import data as data_mod
from .checkpoint import checkpoint_byte_size, load_checkpoint
from .config import RunConfig
from .metrics import (confusion, render_report_text, report, roc_auc,
                      write_report_csv, write_roc_csv)
from .model import build_mpoxsldnet, count_parameters, summary_text
from .training import (evaluate_model, evaluation_split_ids,
                       load_model_for_eval, model_tensors, train_many,
                       write_eval_files)


def _base_config(args) -> RunConfig:
    cfg = RunConfig.load_json(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.override(
        data_root=getattr(args, "data", None),
        out_dir=getattr(args, "out", None),
        seed=getattr(args, "seed", None),
        epochs=getattr(args, "epochs", None),
        batch_size=getattr(args, "batch_size", None),
        runs=getattr(args, "runs", None),
        split_ratio=getattr(args, "split", None),
        lr=getattr(args, "lr", None),
        beta1=getattr(args, "beta1", None),
        beta2=getattr(args, "beta2", None),
        limit=getattr(args, "limit", None),
        preset=getattr(args, "preset", None),
        dropout_rate=getattr(args, "dropout", None),
        image_size=getattr(args, "image_size", None),
    )


def cmd_train(args) -> int:
    cfg = _base_config(args)
    train_many(cfg)
    return 0


def _eval_from_scores(path, out_dir: Path) -> int:
    labels = []
    preds = []
    scores = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            labels.append(int(row["label"]))
            preds.append(int(row["prediction"]))
            if row.get("score0") not in (None, ""):
                scores.append(float(row["score0"]))
    cm = confusion(labels, preds)
    rep = report(cm)
    roc = None
    if len(scores) == len(labels):
        try:
            roc = roc_auc(scores, labels)
        except ValueError:
            roc = None
    auc = roc.auc if roc else None
    text = render_report_text(rep, cm=cm, auc=auc)
    print(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(text + "\n")
        write_report_csv(rep, out_dir / "report.csv")
        (out_dir / "confusion.csv").write_text(
            f"tp,fn,fp,tn\n{cm.tp},{cm.fn},{cm.fp},{cm.tn}\n")
        if roc is not None:
            write_roc_csv(roc, out_dir / "roc.csv")
    return 0


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if args.from_scores:
        return _eval_from_scores(args.from_scores, out_dir)
    if not args.checkpoint:
        raise ValueError("evaluate needs --checkpoint or --from-scores")
    ckpt = load_checkpoint(args.checkpoint)
    model, cfg = load_model_for_eval(ckpt)
    if args.data:
        index = data_mod.scan_dataset(args.data, limit=args.limit)
        ids = range(len(index))
    else:
        index = data_mod.scan_dataset(cfg.data_root, limit=cfg.limit)
        ids = evaluation_split_ids(cfg, index)
    if cfg.class_names and tuple(index.class_names) != tuple(cfg.class_names):
        raise ValueError(
            f"dataset classes {index.class_names} do not match checkpoint "
            f"classes {list(cfg.class_names)}")
    outcome = evaluate_model(model, index, ids, batch_size=cfg.batch_size)
    auc = outcome.roc.auc if outcome.roc else None
    print(render_report_text(outcome.classification, cm=outcome.cm, auc=auc))
    print(f"loss: {outcome.loss:.6f}")
    if out_dir is not None:
        write_eval_files(outcome, out_dir)
    return 0


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    model, cfg = load_model_for_eval(ckpt)
    names = list(cfg.class_names) if cfg.class_names else ["0", "1"]
    failures = 0
    for path in args.images:
        try:
            img = data_mod.preprocess(path, cfg.model.image_size)
        except Exception as e:
            failures += 1
            print(f"error: cannot decode {path}: {e}", file=sys.stderr)
            continue
        out = model.forward(img[None, ...], training=False)[0]
        label = int(out.argmax())  # tie goes to class 0
        print(f"{path},{names[label]},{out[0]:.6f},{out[1]:.6f}")
    return 1 if failures == len(args.images) else 0


def cmd_summary(args) -> int:
    cfg = _base_config(args)
    model = build_mpoxsldnet(cfg.model, seed=cfg.seed)
    tensors = model_tensors(model)
    est = checkpoint_byte_size({k: v.shape for k, v in tensors.items()},
                               cfg.to_dict())
    print(summary_text(model, checkpoint_bytes=est))
    if args.compare:
        table = count_parameters(model)
        print(f"\n{'model':<24} {'parameters':>14}")
        print(f"{'this config':<24} {table.total:>14}")
        for item in args.compare:
            name, _, count = item.partition("=")
            if not count:
                raise ValueError(f"--compare expects name=count, got {item!r}")
            print(f"{name:<24} {int(count):>14}")
    return 0


def cmd_augment_preview(args) -> int:
    index = data_mod.scan_dataset(args.data, limit=args.limit)
    policy = (data_mod.AugmentPolicy.identity() if args.identity
              else data_mod.AugmentPolicy())
    out = Path(args.out) if args.out else Path("preview.png")
    data_mod.preview_grid(index, args.n, policy, args.seed, out,
                          image_size=args.image_size or 224)
    print(f"wrote {out}")
    return 0


def cmd_dataset_stats(args) -> int:
    index = data_mod.scan_dataset(args.data, limit=args.limit)
    for name, count in index.counts.items():
        print(f"{name},{count}")
    print(f"total,{len(index)}")
    if index.skipped:
        print(f"skipped,{len(index.skipped)}")
    if args.out:
        data_mod.write_dataset_stats_csv(index, args.out)
    return 0


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "config": lambda: p.add_argument("--config", help="JSON config file"),
        "data": lambda: p.add_argument("--data", help="dataset root directory"),
        "seed": lambda: p.add_argument("--seed", type=int, help="master seed"),
        "epochs": lambda: p.add_argument("--epochs", type=int),
        "batch-size": lambda: p.add_argument("--batch-size", type=int, dest="batch_size"),
        "runs": lambda: p.add_argument("--runs", type=int),
        "lr": lambda: p.add_argument("--lr", type=float),
        "beta1": lambda: p.add_argument("--beta1", type=float),
        "beta2": lambda: p.add_argument("--beta2", type=float),
        "split": lambda: p.add_argument("--split", type=float, help="train fraction"),
        "preset": lambda: p.add_argument("--preset",
                                         choices=["six-pool", "paper-figure"]),
        "dropout": lambda: p.add_argument("--dropout", type=float),
        "limit": lambda: p.add_argument("--limit", type=int,
                                        help="cap records, round-robin by class"),
        "image-size": lambda: p.add_argument("--image-size", type=int,
                                             dest="image_size"),
        "out": lambda: p.add_argument("--out", help="output directory"),
    }
    for name in names:
        flags[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpoxsldnet",
        description="From-scratch CNN engine for binary skin-lesion classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one or more seeded runs")
    _add_common(p, "config", "data", "seed", "epochs", "batch-size", "runs",
                "lr", "beta1", "beta2", "split", "preset", "dropout", "limit",
                "image-size", "out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint or a score file")
    p.add_argument("--checkpoint", help="MPXT checkpoint path")
    p.add_argument("--from-scores",
                   help="CSV of label,prediction[,score0]; bypasses the model")
    _add_common(p, "data", "limit", "out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify image files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("summary", help="print the model summary table")
    _add_common(p, "config", "seed", "preset", "dropout", "image-size")
    p.add_argument("--compare", action="append",
                   help="name=param_count rows for a comparison table")
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("augment-preview", help="write an augmented sample grid")
    _add_common(p, "data", "limit", "out", "image-size")
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity", action="store_true",
                   help="disable the random transforms")
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser("dataset-stats", help="per-class image counts")
    _add_common(p, "data", "limit", "out")
    p.set_defaults(func=cmd_dataset_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # contract: single-line parsable error, nonzero exit
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
