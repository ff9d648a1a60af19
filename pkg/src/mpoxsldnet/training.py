"""Training orchestration: single runs, multi-run protocol, and evaluation.

Run r of a multi-run session uses seed = master_seed + r.  Within a run every
random draw derives from that run seed (see rng module), so the whole session
is reproducible bit for bit at data-worker count 1.

Per-epoch "validation" is computed on the held-out split; there is no third
split, mirroring the two-way protocol this engine reproduces.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from .checkpoint import Checkpoint, save_checkpoint
from .config import RunConfig
from .kernels import all_finite
from .metrics import (ClassificationReport, ConfusionMatrix, RocCurve,
                      RunHistory, RunSummary, aggregate_runs, confusion,
                      export_curves, render_report_text, report, roc_auc,
                      write_report_csv, write_roc_csv)
from .model import Model, build_mpoxsldnet
from .optim import Adam, bce_loss
from .rng import derive_seed


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainState:
    model: Model
    adam: Adam
    step: int = 0


def model_tensors(model: Model, adam: Adam | None = None, step: int = 0
                  ) -> dict[str, np.ndarray]:
    """Named tensors for checkpointing: parameters, running stats, and
    optionally the Adam moment buffers."""
    tensors: dict[str, np.ndarray] = {}
    tensors.update(model.named_params())
    tensors.update(model.named_state())
    if adam is not None:
        for name, m in adam.m.items():
            tensors[f"adam.m.{name}"] = m
        for name, v in adam.v.items():
            tensors[f"adam.v.{name}"] = v
    return tensors


def restore_model(model: Model, ckpt: Checkpoint) -> None:
    expected = set(model.named_params()) | set(model.named_state())
    stored = {k for k in ckpt.tensors if not k.startswith("adam.")}
    if expected != stored:
        missing = sorted(expected - stored)
        extra = sorted(stored - expected)
        raise ValueError(
            f"checkpoint does not match model: missing {missing}, unexpected {extra}")
    for name in expected:
        model.set_param(name, ckpt.tensors[name].copy())


@dataclass
class EvalOutcome:
    loss: float
    accuracy: float
    cm: ConfusionMatrix
    classification: ClassificationReport
    roc: RocCurve | None
    n: int
    skipped: int


def evaluate_model(model: Model, index: data_mod.DatasetIndex, record_ids,
                   *, batch_size: int = 32, workers: int | None = None
                   ) -> EvalOutcome:
    """Eval-mode forward over ordered, unaugmented batches plus full metrics."""
    labels: list[int] = []
    preds: list[int] = []
    scores: list[float] = []
    loss_sum = 0.0
    n = 0
    skipped = 0
    for batch in data_mod.batches(index, record_ids, batch_size=batch_size,
                                  mode="eval", image_size=model.config.image_size,
                                  workers=workers):
        out = model.forward(batch.images, training=False)
        loss = bce_loss(out, batch.labels)
        loss_sum += loss.value * len(batch.record_ids)
        n += len(batch.record_ids)
        skipped += len(batch.skipped)
        labels.extend(int(v) for v in batch.labels.argmax(axis=1))
        preds.extend(int(v) for v in out.argmax(axis=1))
        scores.extend(float(v) for v in out[:, 0])
    if n == 0:
        raise ValueError("no evaluable records")
    cm = confusion(labels, preds)
    class_names = tuple(index.class_names)
    rep = report(cm, class_names=class_names)
    try:
        roc = roc_auc(scores, labels)
    except ValueError:
        roc = None
    return EvalOutcome(loss=loss_sum / n, accuracy=rep.accuracy, cm=cm,
                       classification=rep, roc=roc, n=n, skipped=skipped)



def train_single_run(cfg: RunConfig, index: data_mod.DatasetIndex, run_id: int,
                     out_dir, verbose: bool = True):
    """One full training run; returns (RunHistory, final checkpoint path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_seed = cfg.seed + run_id
    plan = data_mod.split(index, ratio=cfg.split_ratio,
                          seed=derive_seed(run_seed, "split"))
    model = build_mpoxsldnet(cfg.model, seed=run_seed)
    adam = Adam(model.named_params(), lr=cfg.lr, beta1=cfg.beta1,
                beta2=cfg.beta2, eps=cfg.adam_eps)
    state = TrainState(model=model, adam=adam)
    history = RunHistory(run_id=run_id, seed=run_seed)
    # out_dir is invocation metadata, not evaluation state; keep it out of
    # the checkpoint so identical training inputs give identical bytes
    embedded = replace(cfg, seed=run_seed, runs=1,
                       out_dir=RunConfig().out_dir,
                       class_names=tuple(index.class_names)).to_dict()
    best_val = -1.0
    best_path = out_dir / "best.mpxt"
    final_path = out_dir / "final.mpxt"

    for epoch in range(cfg.epochs):
        correct = 0
        seen = 0
        loss_sum = 0.0
        skipped = 0
        for batch in data_mod.batches(index, plan.train_ids,
                                      batch_size=cfg.batch_size, mode="train",
                                      image_size=cfg.model.image_size,
                                      master_seed=run_seed, epoch=epoch):
            out = model.forward(batch.images, training=True)
            loss = bce_loss(out, batch.labels)
            state.step += 1
            if not np.isfinite(loss.value) or not all_finite(out):
                raise TrainingAborted(
                    f"non-finite loss at run {run_id} epoch {epoch + 1} "
                    f"step {state.step}")
            model.backward(loss.grad)
            try:
                adam.step(model.named_grads())
            except FloatingPointError as e:
                raise TrainingAborted(
                    f"{e} at run {run_id} epoch {epoch + 1} step {state.step}") from e
            b = len(batch.record_ids)
            correct += int((out.argmax(axis=1) == batch.labels.argmax(axis=1)).sum())
            seen += b
            loss_sum += loss.value * b
            skipped += len(batch.skipped)
        val = evaluate_model(model, index, plan.test_ids, batch_size=cfg.batch_size)
        history.train_acc.append(correct / seen)
        history.train_loss.append(loss_sum / seen)
        history.val_acc.append(val.accuracy)
        history.val_loss.append(val.loss)
        if verbose:
            note = f" skipped={skipped + val.skipped}" if skipped + val.skipped else ""
            print(f"run {run_id} epoch {epoch + 1}/{cfg.epochs} "
                  f"train_acc={history.train_acc[-1]:.4f} "
                  f"train_loss={history.train_loss[-1]:.4f} "
                  f"val_acc={val.accuracy:.4f} val_loss={val.loss:.4f}{note}")
        if val.accuracy > best_val:
            best_val = val.accuracy
            save_checkpoint(best_path, embedded,
                            model_tensors(model), step=state.step)

    save_checkpoint(final_path, embedded,
                    model_tensors(model, adam=adam), step=state.step)
    export_curves(history, out_dir, stem="history")
    final_eval = evaluate_model(model, index, plan.test_ids,
                                batch_size=cfg.batch_size)
    write_eval_files(final_eval, out_dir)
    return history, final_path


def write_eval_files(outcome: EvalOutcome, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    auc = outcome.roc.auc if outcome.roc else None
    text = render_report_text(outcome.classification, cm=outcome.cm, auc=auc)
    (out_dir / "report.txt").write_text(text + f"\nloss: {outcome.loss:.6f}\n")
    write_report_csv(outcome.classification, out_dir / "report.csv")
    cm = outcome.cm
    (out_dir / "confusion.csv").write_text(
        f"tp,fn,fp,tn\n{cm.tp},{cm.fn},{cm.fp},{cm.tn}\n")
    if outcome.roc is not None:
        write_roc_csv(outcome.roc, out_dir / "roc.csv")


def train_many(cfg: RunConfig, verbose: bool = True):
    """Run cfg.runs seeded training runs and aggregate their final metrics."""
    if not cfg.data_root:
        raise ValueError("training requires a dataset root")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = data_mod.scan_dataset(cfg.data_root, limit=cfg.limit)
    cfg = replace(cfg, class_names=tuple(index.class_names))
    cfg.save_json(out_dir / "config.json")
    histories = []
    for r in range(cfg.runs):
        history, _ = train_single_run(cfg, index, r, out_dir / f"run{r}",
                                      verbose=verbose)
        histories.append(history)
    summary = aggregate_runs(histories)
    write_aggregate_csv(summary, out_dir / "aggregate.csv")
    if verbose:
        print(f"runs={summary.runs} "
              f"mean_final_train_acc={summary.mean_train_acc:.4f} "
              f"mean_final_val_acc={summary.mean_val_acc:.4f}")
    return histories, summary


def write_aggregate_csv(summary: RunSummary, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "mean", "min", "max"])
        writer.writerow(["final_train_acc", f"{summary.mean_train_acc:.6f}",
                         f"{summary.min_train_acc:.6f}", f"{summary.max_train_acc:.6f}"])
        writer.writerow(["final_val_acc", f"{summary.mean_val_acc:.6f}",
                         f"{summary.min_val_acc:.6f}", f"{summary.max_val_acc:.6f}"])
        writer.writerow(["final_train_loss", f"{summary.mean_train_loss:.6f}", "", ""])
        writer.writerow(["final_val_loss", f"{summary.mean_val_loss:.6f}", "", ""])


def evaluation_split_ids(cfg: RunConfig, index: data_mod.DatasetIndex):
    """Reconstruct the held-out ids recorded by a checkpoint's config."""
    plan = data_mod.split(index, ratio=cfg.split_ratio,
                          seed=derive_seed(cfg.seed, "split"))
    return plan.test_ids


def load_model_for_eval(ckpt: Checkpoint) -> tuple[Model, RunConfig]:
    cfg = RunConfig.from_dict(ckpt.config)
    model = build_mpoxsldnet(cfg.model, seed=cfg.seed)
    restore_model(model, ckpt)
    return model, cfg


